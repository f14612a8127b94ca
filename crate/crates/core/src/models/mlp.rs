//! Affine layers with ReLU between them.

use crate::error::Result;
use crate::numerics::{matmul, matmul_nt, matmul_tn, relu, relu_backward, Matrix, RngStream};

pub(crate) struct Cache {
    input: Matrix,
    /// Pre-activation, kept only for hidden layers.
    pre_activation: Option<Matrix>,
}

fn split(p: &[f64], i: usize, o: usize) -> (&[f64], &[f64]) {
    p.split_at(o * i)
}

pub(crate) fn forward(
    (i, o): (usize, usize),
    p: &[f64],
    x: Matrix,
    hidden: bool,
    keep: bool,
) -> Result<(Matrix, Option<Cache>)> {
    let (w, b) = split(p, i, o);
    let w = Matrix::from_vec(o, i, w.to_vec())?;
    let mut z = matmul_nt(&x, &w)?;
    z.add_row_vector(b)?;
    let (out, pre) = if hidden {
        (relu(&z), Some(z))
    } else {
        (z, None)
    };
    let cache = keep.then_some(Cache {
        input: x,
        pre_activation: pre,
    });
    Ok((out, cache))
}

pub(crate) fn backward(
    (i, o): (usize, usize),
    p: &[f64],
    cache: &Cache,
    grad_out: &Matrix,
    grads: &mut [f64],
    need_input: bool,
) -> Result<Option<Matrix>> {
    let g = match &cache.pre_activation {
        Some(z) => relu_backward(z, grad_out),
        None => grad_out.clone(),
    };
    let (gw, gb) = grads.split_at_mut(o * i);
    let dw = matmul_tn(&g, &cache.input)?;
    gw.copy_from_slice(dw.as_slice());
    gb.copy_from_slice(&g.column_sums());
    if !need_input {
        return Ok(None);
    }
    let (w, _) = split(p, i, o);
    let w = Matrix::from_vec(o, i, w.to_vec())?;
    Ok(Some(matmul(&g, &w)?))
}

/// Weights uniform in `±1/√fan_in`, biases zero.
pub(crate) fn init((i, o): (usize, usize), p: &mut [f64], rng: &mut RngStream) {
    let bound = 1.0 / (i as f64).sqrt();
    let (w, b) = p.split_at_mut(o * i);
    for v in w.iter_mut() {
        *v = rng.uniform_range(-bound, bound);
    }
    b.fill(0.0);
}
