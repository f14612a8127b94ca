//! Gaussian RBF KAN layer: `z = layernorm(x)`,
//! `φ_j(z) = exp(−((z − c_j)/h)²)` over fixed centres, and
//! `out = φ(z)·W_rbfᵀ + a(x)·W_baseᵀ + b`, with `a` the identity or SiLU.

use super::config::{BaseActivation, ModelConfig};
use crate::error::Result;
use crate::numerics::{matmul, matmul_nt, matmul_tn, silu, silu_derivative, Matrix, RngStream};

pub(crate) struct Cache {
    input: Matrix,
    normalized: Matrix,
    inv_std: Vec<f64>,
    z: Matrix,
    phi: Matrix,
    base_input: Option<Matrix>,
}

struct Params<'a> {
    gamma: &'a [f64],
    beta: &'a [f64],
    rbf_w: &'a [f64],
    base_w: &'a [f64],
    base_b: &'a [f64],
}

fn split(p: &[f64], i: usize, o: usize, nc: usize) -> Params<'_> {
    let (gamma, rest) = p.split_at(i);
    let (beta, rest) = rest.split_at(i);
    let (rbf_w, rest) = rest.split_at(o * i * nc);
    let (base_w, base_b) = rest.split_at(o * i);
    Params {
        gamma,
        beta,
        rbf_w,
        base_w,
        base_b,
    }
}

/// Row-wise standardization (biased variance) without the affine part.
/// Returns the normalized rows and `1/√(var + eps)` per row.
pub fn layer_norm(x: &Matrix, eps: f64) -> (Matrix, Vec<f64>) {
    let (rows, cols) = x.shape();
    let mut out = Matrix::zeros(rows, cols);
    let mut inv_std = Vec::with_capacity(rows);
    let n = cols as f64;
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let s = 1.0 / (var + eps).sqrt();
        for (o, v) in out.row_mut(r).iter_mut().zip(row) {
            *o = (v - mean) * s;
        }
        inv_std.push(s);
    }
    (out, inv_std)
}

pub(crate) fn forward(
    cfg: &ModelConfig,
    (i, o): (usize, usize),
    p: &[f64],
    x: Matrix,
    keep: bool,
) -> Result<(Matrix, Option<Cache>)> {
    let nc = cfg.num_centers;
    let params = split(p, i, o, nc);
    let centers = cfg.rbf_centers();
    let inv_h = 1.0 / cfg.rbf_bandwidth();
    let rows = x.rows();

    let (normalized, inv_std) = layer_norm(&x, cfg.layer_norm_eps);
    let mut z = normalized.clone();
    for r in 0..rows {
        for ((v, g), b) in z.row_mut(r).iter_mut().zip(params.gamma).zip(params.beta) {
            *v = *v * g + b;
        }
    }
    let mut phi = Matrix::zeros(rows, i * nc);
    for (k, &zv) in z.as_slice().iter().enumerate() {
        for (ph, &c) in phi.as_mut_slice()[k * nc..(k + 1) * nc]
            .iter_mut()
            .zip(&centers)
        {
            let u = (zv - c) * inv_h;
            *ph = (-u * u).exp();
        }
    }

    let rbf_w = Matrix::from_vec(o, i * nc, params.rbf_w.to_vec())?;
    let base_w = Matrix::from_vec(o, i, params.base_w.to_vec())?;
    let mut out = matmul_nt(&phi, &rbf_w)?;
    let base_input = match cfg.rbf_base_activation {
        BaseActivation::Identity => None,
        BaseActivation::Silu => Some(silu(&x)),
    };
    out.add_assign(&matmul_nt(base_input.as_ref().unwrap_or(&x), &base_w)?)?;
    out.add_row_vector(params.base_b)?;

    let cache = keep.then_some(Cache {
        input: x,
        normalized,
        inv_std,
        z,
        phi,
        base_input,
    });
    Ok((out, cache))
}

pub(crate) fn backward(
    cfg: &ModelConfig,
    (i, o): (usize, usize),
    p: &[f64],
    cache: &Cache,
    g: &Matrix,
    grads: &mut [f64],
    need_input: bool,
) -> Result<Option<Matrix>> {
    let nc = cfg.num_centers;
    let params = split(p, i, o, nc);
    let centers = cfg.rbf_centers();
    let inv_h = 1.0 / cfg.rbf_bandwidth();
    let rows = g.rows();

    let (g_gamma, rest) = grads.split_at_mut(i);
    let (g_beta, rest) = rest.split_at_mut(i);
    let (g_rbf, rest) = rest.split_at_mut(o * i * nc);
    let (g_base_w, g_base_b) = rest.split_at_mut(o * i);

    g_rbf.copy_from_slice(matmul_tn(g, &cache.phi)?.as_slice());
    let base_input = cache.base_input.as_ref().unwrap_or(&cache.input);
    g_base_w.copy_from_slice(matmul_tn(g, base_input)?.as_slice());
    g_base_b.copy_from_slice(&g.column_sums());

    // Through the Gaussians: dφ/dz = φ · (−2 (z − c) / h²).
    let rbf_w = Matrix::from_vec(o, i * nc, params.rbf_w.to_vec())?;
    let d_phi = matmul(g, &rbf_w)?;
    let mut dz = Matrix::zeros(rows, i);
    for (k, d) in dz.as_mut_slice().iter_mut().enumerate() {
        let zv = cache.z.as_slice()[k];
        let span = k * nc..(k + 1) * nc;
        *d = d_phi.as_slice()[span.clone()]
            .iter()
            .zip(&cache.phi.as_slice()[span])
            .zip(&centers)
            .map(|((dp, ph), c)| dp * ph * (-2.0 * (zv - c) * inv_h * inv_h))
            .sum();
    }

    g_gamma.fill(0.0);
    g_beta.fill(0.0);
    for r in 0..rows {
        for ((gg, gb), (d, xh)) in g_gamma
            .iter_mut()
            .zip(g_beta.iter_mut())
            .zip(dz.row(r).iter().zip(cache.normalized.row(r)))
        {
            *gg += d * xh;
            *gb += d;
        }
    }

    if !need_input {
        return Ok(None);
    }
    let base_w = Matrix::from_vec(o, i, params.base_w.to_vec())?;
    let mut dx = matmul(g, &base_w)?;
    if cfg.rbf_base_activation == BaseActivation::Silu {
        for (d, &v) in dx.as_mut_slice().iter_mut().zip(cache.input.as_slice()) {
            *d *= silu_derivative(v);
        }
    }
    let n = i as f64;
    for r in 0..rows {
        let xhat = cache.normalized.row(r);
        let d_xhat: Vec<f64> = dz
            .row(r)
            .iter()
            .zip(params.gamma)
            .map(|(d, g)| d * g)
            .collect();
        let mean_d = d_xhat.iter().sum::<f64>() / n;
        let mean_dx = d_xhat.iter().zip(xhat).map(|(d, x)| d * x).sum::<f64>() / n;
        let s = cache.inv_std[r];
        for ((out, d), x) in dx.row_mut(r).iter_mut().zip(&d_xhat).zip(xhat) {
            *out += s * (d - mean_d - x * mean_dx);
        }
    }
    Ok(Some(dx))
}

/// Layer-norm gain 1 / bias 0; RBF weights ~ N(0, 0.1²) truncated to ±2;
/// base affine weights and bias uniform in `±1/√fan_in`.
pub(crate) fn init(cfg: &ModelConfig, (i, o): (usize, usize), p: &mut [f64], rng: &mut RngStream) {
    const RBF_STD: f64 = 0.1;
    let nc = cfg.num_centers;
    let bound = 1.0 / (i as f64).sqrt();
    let (gamma, rest) = p.split_at_mut(i);
    let (beta, rest) = rest.split_at_mut(i);
    let (rbf_w, rest) = rest.split_at_mut(o * i * nc);
    gamma.fill(1.0);
    beta.fill(0.0);
    for v in rbf_w.iter_mut() {
        *v = loop {
            let s = rng.standard_normal() * RBF_STD;
            if s.abs() <= 2.0 {
                break s;
            }
        };
    }
    for v in rest.iter_mut() {
        *v = rng.uniform_range(-bound, bound);
    }
}
