//! Uniform-knot B-spline bases via the Cox–de Boor recursion.

use crate::numerics::Matrix;

/// Extended uniform knot vector: `grid_size` intervals on `[lo, hi]` plus
/// `order` extra knots on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineGrid {
    knots: Vec<f64>,
    order: usize,
    grid_size: usize,
    range: (f64, f64),
}

impl SplineGrid {
    pub fn uniform(grid_size: usize, order: usize, lo: f64, hi: f64) -> Self {
        assert!(grid_size > 0 && hi > lo, "invalid spline grid");
        let h = (hi - lo) / grid_size as f64;
        let knots = (0..grid_size + 2 * order + 1)
            .map(|j| lo + (j as f64 - order as f64) * h)
            .collect();
        SplineGrid {
            knots,
            order,
            grid_size,
            range: (lo, hi),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn num_basis(&self) -> usize {
        self.grid_size + self.order
    }

    /// Scratch length needed by [`SplineGrid::eval_into`].
    pub fn scratch_len(&self) -> usize {
        self.knots.len() - 1
    }

    /// Runs the recursion up to `order - 1` in `scratch`, then writes the final
    /// level into `basis` and, if requested, the derivative into `deriv`.
    ///
    /// `scratch` must be `scratch_len()` long; `basis`/`deriv` `num_basis()` long.
    pub fn eval_into(
        &self,
        x: f64,
        scratch: &mut [f64],
        basis: &mut [f64],
        deriv: Option<&mut [f64]>,
    ) {
        let t = &self.knots;
        let nb = self.num_basis();
        let m = t.len() - 1;
        for j in 0..m {
            scratch[j] = if x >= t[j] && x < t[j + 1] { 1.0 } else { 0.0 };
        }
        for k in 1..self.order {
            for j in 0..m - k {
                let left = (x - t[j]) / (t[j + k] - t[j]);
                let right = (t[j + k + 1] - x) / (t[j + k + 1] - t[j + 1]);
                scratch[j] = left * scratch[j] + right * scratch[j + 1];
            }
        }
        let k = self.order;
        if k == 0 {
            basis.copy_from_slice(&scratch[..nb]);
            if let Some(d) = deriv {
                d.fill(0.0);
            }
            return;
        }
        for j in 0..nb {
            let left = (x - t[j]) / (t[j + k] - t[j]);
            let right = (t[j + k + 1] - x) / (t[j + k + 1] - t[j + 1]);
            basis[j] = left * scratch[j] + right * scratch[j + 1];
        }
        if let Some(d) = deriv {
            let kf = k as f64;
            for j in 0..nb {
                d[j] = kf
                    * (scratch[j] / (t[j + k] - t[j]) - scratch[j + 1] / (t[j + k + 1] - t[j + 1]));
            }
        }
    }
}

/// Basis values for each `x`: one row per input, `num_basis()` columns.
pub fn bspline_basis(x: &[f64], grid: &SplineGrid) -> Matrix {
    let nb = grid.num_basis();
    let mut out = Matrix::zeros(x.len(), nb);
    let mut scratch = vec![0.0; grid.scratch_len()];
    for (i, &xi) in x.iter().enumerate() {
        grid.eval_into(xi, &mut scratch, out.row_mut(i), None);
    }
    out
}

/// `dB_j/dx` for each `x`, same layout as [`bspline_basis`].
pub fn bspline_basis_derivative(x: &[f64], grid: &SplineGrid) -> Matrix {
    let nb = grid.num_basis();
    let mut out = Matrix::zeros(x.len(), nb);
    let mut scratch = vec![0.0; grid.scratch_len()];
    let mut basis = vec![0.0; nb];
    for (i, &xi) in x.iter().enumerate() {
        grid.eval_into(xi, &mut scratch, &mut basis, Some(out.row_mut(i)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    /// Textbook de Boor evaluation of `Σ c_j B_j(x)`; with a unit coefficient
    /// vector it yields a single basis function. Shares no code with the
    /// Cox–de Boor path above.
    fn de_boor(knots: &[f64], order: usize, coeffs: &[f64], x: f64) -> f64 {
        let n = coeffs.len();
        // Interval index with t[s] <= x < t[s+1], restricted to the valid span.
        let mut s = None;
        for j in order..n {
            if x >= knots[j] && x < knots[j + 1] {
                s = Some(j);
            }
        }
        let Some(s) = s else { return 0.0 };
        let mut d: Vec<f64> = (0..=order).map(|j| coeffs[j + s - order]).collect();
        for r in 1..=order {
            for j in (r..=order).rev() {
                let i = j + s - order;
                let alpha = (x - knots[i]) / (knots[i + order + 1 - r] - knots[i]);
                d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
            }
        }
        d[order]
    }

    fn default_grid() -> SplineGrid {
        SplineGrid::uniform(5, 3, -1.0, 1.0)
    }

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.knots().len(), 5 + 2 * 3 + 1);
        assert_eq!(g.num_basis(), 8);
        let h = g.knots()[1] - g.knots()[0];
        for w in g.knots().windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - h).abs() < 1e-12);
        }
        assert!((g.knots()[3] + 1.0).abs() < 1e-12);
        assert!((g.knots()[8] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_of_unity_and_zero_derivative_sum() {
        let g = default_grid();
        let mut rng = RngStream::new(17);
        let xs: Vec<f64> = (0..1000).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let b = bspline_basis(&xs, &g);
        let d = bspline_basis_derivative(&xs, &g);
        for i in 0..xs.len() {
            let s: f64 = b.row(i).iter().sum();
            let ds: f64 = d.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(ds.abs() < 1e-9);
        }
    }

    #[test]
    fn centre_is_palindromic() {
        let g = default_grid();
        let b = bspline_basis(&[0.0], &g);
        let row = b.row(0);
        for j in 0..row.len() {
            assert!((row[j] - row[row.len() - 1 - j]).abs() < 1e-12);
        }
    }

    #[test]
    fn agrees_with_de_boor_oracle() {
        let g = default_grid();
        let mut rng = RngStream::new(99);
        // de Boor with 8 coefficients is defined on the full-support span [t_3, t_8).
        let xs: Vec<f64> = (0..50).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let b = bspline_basis(&xs, &g);
        for (i, &x) in xs.iter().enumerate() {
            for j in 0..8 {
                let mut c = vec![0.0; 8];
                c[j] = 1.0;
                let oracle = de_boor(g.knots(), 3, &c, x);
                assert!((b.get(i, j) - oracle).abs() < 1e-12, "x={x} j={j}");
            }
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let g = default_grid();
        let mut rng = RngStream::new(8);
        let h = 1e-6;
        for _ in 0..200 {
            let x = rng.uniform_range(-2.0, 2.0);
            let d = bspline_basis_derivative(&[x], &g);
            let p = bspline_basis(&[x + h], &g);
            let m = bspline_basis(&[x - h], &g);
            for j in 0..8 {
                let fd = (p.get(0, j) - m.get(0, j)) / (2.0 * h);
                assert!((fd - d.get(0, j)).abs() < 1e-6, "x={x} j={j}");
            }
        }
    }

    #[test]
    fn derivative_is_continuous_across_interior_knot() {
        let g = default_grid();
        let knot = g.knots()[5];
        let d = 1e-8;
        let at = bspline_basis(&[knot], &g);
        let left = bspline_basis(&[knot - d], &g);
        let right = bspline_basis(&[knot + d], &g);
        let analytic = bspline_basis_derivative(&[knot], &g);
        for j in 0..8 {
            let fd_left = (at.get(0, j) - left.get(0, j)) / d;
            let fd_right = (right.get(0, j) - at.get(0, j)) / d;
            assert!((fd_left - fd_right).abs() < 1e-6, "j={j}");
            assert!((fd_right - analytic.get(0, j)).abs() < 1e-6, "j={j}");
        }
    }

    #[test]
    fn basis_vanishes_far_outside_support() {
        let g = default_grid();
        let b = bspline_basis(&[3.0, -3.0], &g);
        assert!(b.as_slice().iter().all(|&v| v == 0.0));
    }
}
