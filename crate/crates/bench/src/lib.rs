//! Shared fixtures for the benchmarks.

use fedkan_core::{Matrix, RngStream};

/// `rows × cols` matrix of uniform values in `[-1, 1)`.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = RngStream::new(seed);
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-1.0, 1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches")
}

pub fn random_labels(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = RngStream::new(seed);
    (0..n).map(|_| rng.below(10) as u8).collect()
}
