//! The three classifiers: MLP, Spline-KAN and RBF-KAN, sharing one flat
//! parameter layout so FedAvg can treat every model as a vector.

pub mod bspline;
pub mod checkpoint;
mod config;
mod mlp;
mod rbf_kan;
mod spline_kan;
mod state;

pub use bspline::{bspline_basis, bspline_basis_derivative, SplineGrid};
pub use config::{
    param_count, BaseActivation, ModelConfig, ModelKind, MNIST_CLASSES, MNIST_INPUTS,
};
pub use rbf_kan::layer_norm;
pub use state::{layout, ModelState, ParamBlock};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

enum LayerCache {
    Mlp(mlp::Cache),
    Spline(spline_kan::Cache),
    Rbf(rbf_kan::Cache),
}

/// Intermediates recorded by [`forward`] for one batch.
pub struct ForwardCache {
    fingerprint: u64,
    kind: ModelKind,
    rows: usize,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

fn run_forward(
    state: &ModelState,
    batch: &Matrix,
    keep: bool,
) -> Result<(Matrix, Vec<LayerCache>)> {
    let cfg = state.config();
    if batch.cols() != cfg.input_width() {
        return Err(Error::config(format!(
            "batch has {} features, {} expects {}",
            batch.cols(),
            cfg.kind,
            cfg.input_width()
        )));
    }
    let bounds = state::layer_bounds(cfg);
    let grid = (cfg.kind == ModelKind::SplineKan).then(|| cfg.spline_grid());
    let n_layers = cfg.layer_widths.len() - 1;
    let mut x = batch.clone();
    let mut caches = Vec::with_capacity(if keep { n_layers } else { 0 });
    for (l, dims) in cfg.layer_dims().enumerate() {
        let p = &state.params()[bounds[l]..bounds[l + 1]];
        let (out, cache) = match cfg.kind {
            ModelKind::Mlp => {
                let (o, c) = mlp::forward(dims, p, x, l + 1 < n_layers, keep)?;
                (o, c.map(LayerCache::Mlp))
            }
            ModelKind::SplineKan => {
                let grid = grid.as_ref().expect("spline grid");
                let (o, c) = spline_kan::forward(cfg, grid, dims, p, x, keep)?;
                (o, c.map(LayerCache::Spline))
            }
            ModelKind::RbfKan => {
                let (o, c) = rbf_kan::forward(cfg, dims, p, x, keep)?;
                (o, c.map(LayerCache::Rbf))
            }
        };
        caches.extend(cache);
        x = out;
    }
    Ok((x, caches))
}

/// Logits for `batch` plus everything [`backward`] needs.
pub fn forward(state: &ModelState, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    let (logits, layers) = run_forward(state, batch, true)?;
    Ok((
        logits,
        ForwardCache {
            fingerprint: state.fingerprint(),
            kind: state.kind(),
            rows: batch.rows(),
            layers,
        },
    ))
}

/// Logits only; keeps no intermediates.
pub fn predict(state: &ModelState, batch: &Matrix) -> Result<Matrix> {
    Ok(run_forward(state, batch, false)?.0)
}

fn expect_kind(state: &ModelState, kind: ModelKind) -> Result<()> {
    if state.kind() != kind {
        return Err(Error::config(format!(
            "expected a {kind} model, got {}",
            state.kind()
        )));
    }
    Ok(())
}

pub fn mlp_forward(state: &ModelState, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    expect_kind(state, ModelKind::Mlp)?;
    forward(state, batch)
}

pub fn spline_kan_forward(state: &ModelState, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    expect_kind(state, ModelKind::SplineKan)?;
    forward(state, batch)
}

pub fn rbf_kan_forward(state: &ModelState, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    expect_kind(state, ModelKind::RbfKan)?;
    forward(state, batch)
}

fn run_backward(
    state: &ModelState,
    cache: &ForwardCache,
    grad_logits: &Matrix,
    need_input: bool,
) -> Result<(Vec<f64>, Option<Matrix>)> {
    if cache.kind != state.kind() || cache.fingerprint != state.fingerprint() {
        return Err(Error::internal(
            "forward cache does not belong to these parameters",
        ));
    }
    let cfg = state.config();
    if grad_logits.shape() != (cache.rows, cfg.output_width()) {
        return Err(Error::internal(format!(
            "upstream gradient {:?} does not match cached batch ({}, {})",
            grad_logits.shape(),
            cache.rows,
            cfg.output_width()
        )));
    }
    let bounds = state::layer_bounds(cfg);
    let dims: Vec<_> = cfg.layer_dims().collect();
    let grid = (cfg.kind == ModelKind::SplineKan).then(|| cfg.spline_grid());
    let mut grads = vec![0.0; state.len()];
    let mut upstream = grad_logits.clone();
    for l in (0..dims.len()).rev() {
        let p = &state.params()[bounds[l]..bounds[l + 1]];
        let g = &mut grads[bounds[l]..bounds[l + 1]];
        let want_input = l > 0 || need_input;
        let dx = match &cache.layers[l] {
            LayerCache::Mlp(c) => mlp::backward(dims[l], p, c, &upstream, g, want_input)?,
            LayerCache::Spline(c) => spline_kan::backward(
                cfg,
                grid.as_ref().expect("spline grid"),
                dims[l],
                p,
                c,
                &upstream,
                g,
                want_input,
            )?,
            LayerCache::Rbf(c) => rbf_kan::backward(cfg, dims[l], p, c, &upstream, g, want_input)?,
        };
        match dx {
            Some(dx) => upstream = dx,
            None => break,
        }
    }
    Ok((grads, need_input.then_some(upstream)))
}

/// Gradient of the loss w.r.t. every parameter, aligned with [`ModelState::layout`].
pub fn backward(
    state: &ModelState,
    cache: &ForwardCache,
    grad_logits: &Matrix,
) -> Result<Vec<f64>> {
    Ok(run_backward(state, cache, grad_logits, false)?.0)
}

/// Parameter gradient plus the gradient w.r.t. the input batch.
pub fn backward_with_input_grad(
    state: &ModelState,
    cache: &ForwardCache,
    grad_logits: &Matrix,
) -> Result<(Vec<f64>, Matrix)> {
    let (g, dx) = run_backward(state, cache, grad_logits, true)?;
    Ok((g, dx.expect("requested")))
}

/// Fresh parameters; deterministic given `rng`.
pub fn init_params(config: &ModelConfig, rng: &mut RngStream) -> Result<ModelState> {
    let mut state = ModelState::zeros(config.clone())?;
    let bounds = state::layer_bounds(config);
    let grid = (config.kind == ModelKind::SplineKan).then(|| config.spline_grid());
    for (l, dims) in config.layer_dims().enumerate() {
        let p = &mut state.params_mut()[bounds[l]..bounds[l + 1]];
        match config.kind {
            ModelKind::Mlp => mlp::init(dims, p, rng),
            ModelKind::SplineKan => {
                spline_kan::init(config, grid.as_ref().expect("spline grid"), dims, p, rng)
            }
            ModelKind::RbfKan => rbf_kan::init(config, dims, p, rng),
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests;
