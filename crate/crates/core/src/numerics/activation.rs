use super::Matrix;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// d/dx [x·σ(x)] = σ(x)·(1 + x·(1 − σ(x))).
#[inline]
pub fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

pub fn silu(x: &Matrix) -> Matrix {
    x.map(|v| v * sigmoid(v))
}

/// Chain rule through SiLU: `grad_out ⊙ silu'(x)`.
pub fn silu_backward(x: &Matrix, grad_out: &Matrix) -> Matrix {
    debug_assert_eq!(x.shape(), grad_out.shape());
    let data = x
        .as_slice()
        .iter()
        .zip(grad_out.as_slice())
        .map(|(&v, &g)| g * silu_derivative(v))
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data).expect("shapes checked")
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Subgradient 0 at the kink.
pub fn relu_backward(x: &Matrix, grad_out: &Matrix) -> Matrix {
    debug_assert_eq!(x.shape(), grad_out.shape());
    let data = x
        .as_slice()
        .iter()
        .zip(grad_out.as_slice())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data).expect("shapes checked")
}
