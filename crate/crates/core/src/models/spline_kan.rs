//! B-spline KAN layer: `out = silu(x)·W_baseᵀ + B(x)·(C ⊙ s)ᵀ`, where `B(x)`
//! stacks the basis values of every input feature and each edge's spline
//! coefficients `C[o, i, :]` are scaled by a standalone scalar `s[o, i]`.

use super::bspline::SplineGrid;
use super::config::ModelConfig;
use crate::error::Result;
use crate::numerics::{matmul, matmul_nt, matmul_tn, silu, silu_derivative, Matrix, RngStream};

pub(crate) struct Cache {
    input: Matrix,
    silu_input: Matrix,
    basis: Matrix,
}

struct Params<'a> {
    base: &'a [f64],
    coeffs: &'a [f64],
    scaler: &'a [f64],
}

fn split(p: &[f64], i: usize, o: usize, nb: usize) -> Params<'_> {
    let (base, rest) = p.split_at(o * i);
    let (coeffs, scaler) = rest.split_at(o * i * nb);
    Params {
        base,
        coeffs,
        scaler,
    }
}

/// `C ⊙ s` broadcast over the basis axis, as an `o × (i·nb)` matrix.
fn scaled_coeffs(p: &Params<'_>, i: usize, o: usize, nb: usize) -> Matrix {
    let mut data = Vec::with_capacity(o * i * nb);
    for (edge, &s) in p.scaler.iter().enumerate() {
        data.extend(p.coeffs[edge * nb..(edge + 1) * nb].iter().map(|c| c * s));
    }
    Matrix::from_vec(o, i * nb, data).expect("sized above")
}

/// Basis matrix `rows × (i·nb)`, and optionally the matching derivatives.
fn expand(grid: &SplineGrid, x: &Matrix, with_deriv: bool) -> (Matrix, Option<Matrix>) {
    let (rows, i) = x.shape();
    let nb = grid.num_basis();
    let mut basis = Matrix::zeros(rows, i * nb);
    let mut deriv = with_deriv.then(|| Matrix::zeros(rows, i * nb));
    let mut scratch = vec![0.0; grid.scratch_len()];
    for (k, &v) in x.as_slice().iter().enumerate() {
        let span = k * nb..(k + 1) * nb;
        let b = &mut basis.as_mut_slice()[span.clone()];
        let d = deriv.as_mut().map(|d| &mut d.as_mut_slice()[span]);
        grid.eval_into(v, &mut scratch, b, d);
    }
    (basis, deriv)
}

pub(crate) fn forward(
    cfg: &ModelConfig,
    grid: &SplineGrid,
    (i, o): (usize, usize),
    p: &[f64],
    x: Matrix,
    keep: bool,
) -> Result<(Matrix, Option<Cache>)> {
    let nb = cfg.num_basis();
    let params = split(p, i, o, nb);
    let silu_x = silu(&x);
    let (basis, _) = expand(grid, &x, false);
    let base_w = Matrix::from_vec(o, i, params.base.to_vec())?;
    let mut out = matmul_nt(&silu_x, &base_w)?;
    out.add_assign(&matmul_nt(&basis, &scaled_coeffs(&params, i, o, nb))?)?;
    let cache = keep.then_some(Cache {
        input: x,
        silu_input: silu_x,
        basis,
    });
    Ok((out, cache))
}

#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
pub(crate) fn backward(
    cfg: &ModelConfig,
    grid: &SplineGrid,
    (i, o): (usize, usize),
    p: &[f64],
    cache: &Cache,
    g: &Matrix,
    grads: &mut [f64],
    need_input: bool,
) -> Result<Option<Matrix>> {
    let nb = cfg.num_basis();
    let params = split(p, i, o, nb);
    let (g_base, rest) = grads.split_at_mut(o * i);
    let (g_coeffs, g_scaler) = rest.split_at_mut(o * i * nb);

    let d_base = matmul_tn(g, &cache.silu_input)?;
    g_base.copy_from_slice(d_base.as_slice());

    // dL/d(C ⊙ s), then split by the product rule.
    let d_scaled = matmul_tn(g, &cache.basis)?;
    let d_scaled = d_scaled.as_slice();
    for edge in 0..o * i {
        let s = params.scaler[edge];
        let span = edge * nb..(edge + 1) * nb;
        let mut ds = 0.0;
        for ((gc, &d), &c) in g_coeffs[span.clone()]
            .iter_mut()
            .zip(&d_scaled[span.clone()])
            .zip(&params.coeffs[span])
        {
            *gc = d * s;
            ds += d * c;
        }
        g_scaler[edge] = ds;
    }

    if !need_input {
        return Ok(None);
    }
    let base_w = Matrix::from_vec(o, i, params.base.to_vec())?;
    let mut dx = matmul(g, &base_w)?;
    for (d, &v) in dx.as_mut_slice().iter_mut().zip(cache.input.as_slice()) {
        *d *= silu_derivative(v);
    }
    let d_basis = matmul(g, &scaled_coeffs(&params, i, o, nb))?;
    let (_, deriv) = expand(grid, &cache.input, true);
    let deriv = deriv.expect("requested");
    for (k, d) in dx.as_mut_slice().iter_mut().enumerate() {
        let span = k * nb..(k + 1) * nb;
        *d += d_basis.as_slice()[span.clone()]
            .iter()
            .zip(&deriv.as_slice()[span])
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    Ok(Some(dx))
}

/// Maps sample values at the `grid_size + 1` grid points to the minimum-norm
/// spline coefficients reproducing them: returns `P` (`nb × points`) with
/// `coeffs = P · values`.
fn curve_fit_operator(grid: &SplineGrid) -> Matrix {
    let order = grid.order();
    let knots = grid.knots();
    let points = &knots[order..knots.len() - order];
    let a = super::bspline::bspline_basis(points, grid);
    let (m, n) = a.shape();
    if m <= n {
        // P = Aᵀ (A Aᵀ)⁻¹
        let gram = matmul_nt(&a, &a).expect("square");
        let inv = invert_spd(&gram);
        matmul_tn(&a, &inv).expect("shapes")
    } else {
        // P = (Aᵀ A)⁻¹ Aᵀ
        let gram = matmul_tn(&a, &a).expect("square");
        let inv = invert_spd(&gram);
        matmul_nt(&inv, &a).expect("shapes")
    }
}

/// Gauss–Jordan inverse with partial pivoting, for the tiny Gram matrices above.
fn invert_spd(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a.get(x, col).abs().total_cmp(&a.get(y, col).abs()))
            .expect("non-empty");
        for c in 0..n {
            let (t, u) = (a.get(col, c), a.get(pivot, c));
            a.set(col, c, u);
            a.set(pivot, c, t);
            let (t, u) = (inv.get(col, c), inv.get(pivot, c));
            inv.set(col, c, u);
            inv.set(pivot, c, t);
        }
        let d = a.get(col, col);
        for c in 0..n {
            a.set(col, c, a.get(col, c) / d);
            inv.set(col, c, inv.get(col, c) / d);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a.get(r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                a.set(r, c, a.get(r, c) - f * a.get(col, c));
                inv.set(r, c, inv.get(r, c) - f * inv.get(col, c));
            }
        }
    }
    inv
}

/// Base weights and scalers uniform in `±1/√fan_in`; coefficients fitted to
/// uniform noise of amplitude `0.1 / grid_size` sampled at the grid points.
pub(crate) fn init(
    cfg: &ModelConfig,
    grid: &SplineGrid,
    (i, o): (usize, usize),
    p: &mut [f64],
    rng: &mut RngStream,
) {
    const SCALE_NOISE: f64 = 0.1;
    let nb = cfg.num_basis();
    let bound = 1.0 / (i as f64).sqrt();
    let fit = curve_fit_operator(grid);
    let points = fit.cols();
    let (base, rest) = p.split_at_mut(o * i);
    let (coeffs, scaler) = rest.split_at_mut(o * i * nb);
    for v in base.iter_mut() {
        *v = rng.uniform_range(-bound, bound);
    }
    let mut noise = vec![0.0; points];
    for edge in 0..o * i {
        for n in noise.iter_mut() {
            *n = (rng.uniform() - 0.5) * SCALE_NOISE / cfg.grid_size as f64;
        }
        for (k, c) in coeffs[edge * nb..(edge + 1) * nb].iter_mut().enumerate() {
            *c = fit.row(k).iter().zip(&noise).map(|(a, b)| a * b).sum();
        }
    }
    for v in scaler.iter_mut() {
        *v = rng.uniform_range(-bound, bound);
    }
}
