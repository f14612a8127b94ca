//! Numeric building blocks shared by every model: a row-major `f64` matrix,
//! elementwise activations, the softmax cross-entropy loss, heavy-ball SGD
//! and seedable random streams.

mod activation;
mod loss;
mod matrix;
mod optim;
mod rng;

pub use activation::{relu, relu_backward, sigmoid, silu, silu_backward, silu_derivative};
pub use loss::{softmax_cross_entropy, softmax_cross_entropy_rows, LossOutput};
pub use matrix::{matmul, matmul_nt, matmul_tn, Matrix};
pub use optim::{sgd_momentum_step, MomentumBuffer};
pub use rng::RngStream;

/// Left-to-right sum. Reductions that feed logged metrics go through this so
/// the accumulation order never depends on the platform's SIMD width.
pub fn sequential_sum(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v)
}
