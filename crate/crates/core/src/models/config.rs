use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bspline::SplineGrid;
use crate::error::{Error, Result};

pub const MNIST_INPUTS: usize = 28 * 28;
pub const MNIST_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    SplineKan,
    RbfKan,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::SplineKan, ModelKind::RbfKan, ModelKind::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::SplineKan => "spline_kan",
            ModelKind::RbfKan => "rbf_kan",
        }
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Mlp => "MLP",
            ModelKind::SplineKan => "Spline-KAN",
            ModelKind::RbfKan => "RBF-KAN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "spline_kan" | "spline" => Ok(ModelKind::SplineKan),
            "rbf_kan" | "rbf" => Ok(ModelKind::RbfKan),
            other => Err(Error::config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Activation applied to the raw input of the RBF-KAN base path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseActivation {
    Identity,
    Silu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub layer_widths: Vec<usize>,
    pub grid_size: usize,
    pub spline_order: usize,
    pub grid_range: [f64; 2],
    pub num_centers: usize,
    pub rbf_range: [f64; 2],
    pub layer_norm_eps: f64,
    pub rbf_base_activation: BaseActivation,
}

impl ModelConfig {
    fn with_widths(kind: ModelKind, layer_widths: Vec<usize>) -> Self {
        ModelConfig {
            kind,
            layer_widths,
            grid_size: 5,
            spline_order: 3,
            grid_range: [-1.0, 1.0],
            num_centers: 8,
            rbf_range: [-2.0, 2.0],
            layer_norm_eps: 1e-5,
            rbf_base_activation: BaseActivation::Identity,
        }
    }

    pub fn mlp(layer_widths: Vec<usize>) -> Self {
        Self::with_widths(ModelKind::Mlp, layer_widths)
    }

    pub fn spline_kan(layer_widths: Vec<usize>) -> Self {
        Self::with_widths(ModelKind::SplineKan, layer_widths)
    }

    pub fn rbf_kan(layer_widths: Vec<usize>) -> Self {
        Self::with_widths(ModelKind::RbfKan, layer_widths)
    }

    /// The MNIST architectures being compared: MLP 784-200-200-10 and both KANs 784-24-24-10.
    pub fn standard(kind: ModelKind) -> Self {
        let hidden = match kind {
            ModelKind::Mlp => [200, 200],
            ModelKind::SplineKan | ModelKind::RbfKan => [24, 24],
        };
        Self::with_widths(
            kind,
            vec![MNIST_INPUTS, hidden[0], hidden[1], MNIST_CLASSES],
        )
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated widths")
    }

    /// `(inputs, outputs)` of every layer.
    pub fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_widths.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn spline_grid(&self) -> SplineGrid {
        SplineGrid::uniform(
            self.grid_size,
            self.spline_order,
            self.grid_range[0],
            self.grid_range[1],
        )
    }

    pub fn num_basis(&self) -> usize {
        self.grid_size + self.spline_order
    }

    /// Fixed Gaussian centres, equally spaced over `rbf_range`.
    pub fn rbf_centers(&self) -> Vec<f64> {
        let [lo, hi] = self.rbf_range;
        let n = self.num_centers;
        (0..n)
            .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
            .collect()
    }

    /// Gaussian width `(hi − lo) / (num_centers − 1)`.
    pub fn rbf_bandwidth(&self) -> f64 {
        (self.rbf_range[1] - self.rbf_range[0]) / (self.num_centers - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 || self.layer_widths.contains(&0) {
            return Err(Error::config(format!(
                "layer widths {:?} need at least two positive entries",
                self.layer_widths
            )));
        }
        match self.kind {
            ModelKind::Mlp => {}
            ModelKind::SplineKan => {
                if self.grid_size == 0 || !(self.grid_range[1] > self.grid_range[0]) {
                    return Err(Error::config("spline grid needs grid_size > 0 and lo < hi"));
                }
            }
            ModelKind::RbfKan => {
                if self.num_centers < 2 || !(self.rbf_range[1] > self.rbf_range[0]) {
                    return Err(Error::config("rbf layer needs >= 2 centres and lo < hi"));
                }
                if !(self.layer_norm_eps >= 0.0) {
                    return Err(Error::config("layer_norm_eps must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// Closed-form parameter count.
///
/// - MLP layer `i → o`: `i·o + o`
/// - Spline-KAN layer: `i·o·(grid_size + order)` coefficients, `i·o` base weights, `i·o` scalers
/// - RBF-KAN layer: `2·i` layer-norm affine, `o·i·centres` RBF weights, `i·o + o` base affine
pub fn param_count(config: &ModelConfig) -> usize {
    config
        .layer_dims()
        .map(|(i, o)| match config.kind {
            ModelKind::Mlp => i * o + o,
            ModelKind::SplineKan => i * o * config.num_basis() + 2 * i * o,
            ModelKind::RbfKan => 2 * i + o * i * config.num_centers + i * o + o,
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_parameter_counts() {
        assert_eq!(param_count(&ModelConfig::standard(ModelKind::Mlp)), 199_210);
        assert_eq!(
            param_count(&ModelConfig::standard(ModelKind::SplineKan)),
            196_320
        );
        assert_eq!(
            param_count(&ModelConfig::standard(ModelKind::RbfKan)),
            178_410
        );
    }

    #[test]
    fn rbf_centres_and_width() {
        let c = ModelConfig::standard(ModelKind::RbfKan);
        let centers = c.rbf_centers();
        assert_eq!(centers.len(), 8);
        assert_eq!(centers[0], -2.0);
        assert_eq!(centers[7], 2.0);
        assert!((c.rbf_bandwidth() - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn kind_round_trips_through_strings() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("cnn".parse::<ModelKind>().is_err());
    }

    #[test]
    fn validation_rejects_degenerate_widths() {
        assert!(ModelConfig::mlp(vec![784]).validate().is_err());
        assert!(ModelConfig::mlp(vec![784, 0, 10]).validate().is_err());
        let mut r = ModelConfig::rbf_kan(vec![4, 2]);
        r.num_centers = 1;
        assert!(r.validate().is_err());
    }
}
