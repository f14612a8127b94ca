use serde::{Deserialize, Serialize};

use super::config::{param_count, ModelConfig, ModelKind};
use crate::error::{Error, Result};

/// Where one named tensor lives inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Tensor names and shapes for `config`, laid out contiguously layer by layer.
pub fn layout(config: &ModelConfig) -> Vec<ParamBlock> {
    let mut blocks = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, shape: Vec<usize>| {
        let b = ParamBlock {
            name,
            shape,
            offset,
        };
        offset += b.len();
        blocks.push(b);
    };
    for (l, (i, o)) in config.layer_dims().enumerate() {
        match config.kind {
            ModelKind::Mlp => {
                push(format!("layers.{l}.weight"), vec![o, i]);
                push(format!("layers.{l}.bias"), vec![o]);
            }
            ModelKind::SplineKan => {
                push(format!("layers.{l}.base_weight"), vec![o, i]);
                push(
                    format!("layers.{l}.spline_weight"),
                    vec![o, i, config.num_basis()],
                );
                push(format!("layers.{l}.spline_scaler"), vec![o, i]);
            }
            ModelKind::RbfKan => {
                push(format!("layers.{l}.layernorm.weight"), vec![i]);
                push(format!("layers.{l}.layernorm.bias"), vec![i]);
                push(
                    format!("layers.{l}.spline_linear.weight"),
                    vec![o, i * config.num_centers],
                );
                push(format!("layers.{l}.base_linear.weight"), vec![o, i]);
                push(format!("layers.{l}.base_linear.bias"), vec![o]);
            }
        }
    }
    blocks
}

/// Offset of each layer's first parameter plus the total, so layer `l` owns
/// `bounds[l]..bounds[l + 1]`.
pub(crate) fn layer_bounds(config: &ModelConfig) -> Vec<usize> {
    let mut bounds = vec![0];
    let mut acc = 0;
    for (i, o) in config.layer_dims() {
        acc += match config.kind {
            ModelKind::Mlp => i * o + o,
            ModelKind::SplineKan => i * o * (config.num_basis() + 2),
            ModelKind::RbfKan => 2 * i + o * i * config.num_centers + i * o + o,
        };
        bounds.push(acc);
    }
    bounds
}

/// Architecture + flat parameters + layout: the unit the server and clients exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    config: ModelConfig,
    params: Vec<f64>,
    layout: Vec<ParamBlock>,
}

impl ModelState {
    pub fn new(config: ModelConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let expected = param_count(&config);
        if params.len() != expected {
            return Err(Error::config(format!(
                "{} parameters supplied, {} expects {expected}",
                params.len(),
                config.kind
            )));
        }
        let layout = layout(&config);
        Ok(ModelState {
            config,
            params,
            layout,
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let n = param_count(&config);
        Self::new(config, vec![0.0; n])
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.layout.iter().find(|b| b.name == name)
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.block(name).map(|b| &self.params[b.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.block(name)?.range();
        Some(&mut self.params[range])
    }

    /// Hash of the exact parameter bits; backward uses it to reject caches
    /// produced from different parameters.
    pub fn fingerprint(&self) -> u64 {
        self.params.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}
