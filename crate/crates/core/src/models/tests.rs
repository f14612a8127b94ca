#![allow(clippy::needless_range_loop)]

use super::*;
use crate::numerics::{sigmoid, softmax_cross_entropy, Matrix, RngStream};

fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut RngStream) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.uniform_range(lo, hi))
            .collect(),
    )
    .unwrap()
}

/// A state with every parameter perturbed so all gradient terms are exercised.
fn perturbed_state(cfg: ModelConfig, seed: u64) -> ModelState {
    let mut rng = RngStream::new(seed);
    let mut s = init_params(&cfg, &mut rng).unwrap();
    for v in s.params_mut() {
        *v += rng.uniform_range(-0.5, 0.5);
    }
    s
}

fn loss_of(state: &ModelState, x: &Matrix, labels: &[u8]) -> f64 {
    softmax_cross_entropy(&predict(state, x).unwrap(), labels)
        .unwrap()
        .loss
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Max relative error of analytic vs central-difference gradients (params, inputs).
fn gradient_check(state: &ModelState, x: &Matrix, labels: &[u8]) -> (f64, f64) {
    let h = 1e-5;
    let (logits, cache) = forward(state, x).unwrap();
    let out = softmax_cross_entropy(&logits, labels).unwrap();
    let (grads, dx) = backward_with_input_grad(state, &cache, &out.grad).unwrap();
    let mut worst_p: f64 = 0.0;
    for k in 0..state.len() {
        let mut plus = state.clone();
        plus.params_mut()[k] += h;
        let mut minus = state.clone();
        minus.params_mut()[k] -= h;
        let fd = (loss_of(&plus, x, labels) - loss_of(&minus, x, labels)) / (2.0 * h);
        worst_p = worst_p.max(rel_err(grads[k], fd));
    }
    let mut worst_x: f64 = 0.0;
    for k in 0..x.as_slice().len() {
        let mut plus = x.clone();
        plus.as_mut_slice()[k] += h;
        let mut minus = x.clone();
        minus.as_mut_slice()[k] -= h;
        let fd = (loss_of(state, &plus, labels) - loss_of(state, &minus, labels)) / (2.0 * h);
        worst_x = worst_x.max(rel_err(dx.as_slice()[k], fd));
    }
    (worst_p, worst_x)
}

fn shrunken(kind: ModelKind, widths: Vec<usize>) -> ModelConfig {
    match kind {
        ModelKind::Mlp => ModelConfig::mlp(widths),
        ModelKind::SplineKan => ModelConfig::spline_kan(widths),
        ModelKind::RbfKan => ModelConfig::rbf_kan(widths),
    }
}

#[test]
fn gradients_match_finite_differences_all_kinds() {
    for kind in ModelKind::ALL {
        // Tiny gradients in the wider config carry ~1e-11 of finite-difference
        // noise, so it gets the looser bound.
        for (seed, widths, tol) in [(1, vec![6, 3, 2], 1e-5), (2, vec![12, 8, 5, 3], 1e-4)] {
            let state = perturbed_state(shrunken(kind, widths.clone()), seed);
            let mut rng = RngStream::new(seed + 100);
            let x = random_matrix(5, widths[0], -1.5, 1.5, &mut rng);
            let classes = *widths.last().unwrap();
            let labels: Vec<u8> = (0..5).map(|_| rng.below(classes) as u8).collect();
            let (p, i) = gradient_check(&state, &x, &labels);
            assert!(p < tol, "{kind} {widths:?}: param rel err {p}");
            assert!(i < tol, "{kind} {widths:?}: input rel err {i}");
        }
    }
}

#[test]
fn rbf_with_silu_base_gradients() {
    let mut cfg = ModelConfig::rbf_kan(vec![6, 3, 2]);
    cfg.rbf_base_activation = BaseActivation::Silu;
    let state = perturbed_state(cfg, 5);
    let mut rng = RngStream::new(55);
    let x = random_matrix(4, 6, -2.0, 2.0, &mut rng);
    let (p, i) = gradient_check(&state, &x, &[0, 1, 1, 0]);
    assert!(p < 1e-5 && i < 1e-5, "{p} {i}");
}

#[test]
fn spline_path_disabled_reduces_to_silu_linear_network() {
    let cfg = ModelConfig::spline_kan(vec![5, 4, 3]);
    let mut state = perturbed_state(cfg.clone(), 9);
    for b in state.layout().to_vec() {
        if b.name.ends_with("spline_weight") || b.name.ends_with("spline_scaler") {
            state.params_mut()[b.range()].fill(0.0);
        }
    }
    let mut rng = RngStream::new(10);
    let x = random_matrix(3, 5, -2.0, 2.0, &mut rng);
    let logits = predict(&state, &x).unwrap();

    // Oracle: y = W1 · silu(W0 · silu(x)) with plain loops.
    let w0 = state.tensor("layers.0.base_weight").unwrap();
    let w1 = state.tensor("layers.1.base_weight").unwrap();
    let silu = |v: f64| v * sigmoid(v);
    for r in 0..3 {
        let hidden: Vec<f64> = (0..4)
            .map(|o| (0..5).map(|i| w0[o * 5 + i] * silu(x.get(r, i))).sum())
            .collect();
        for o in 0..3 {
            let y: f64 = (0..4).map(|i| w1[o * 4 + i] * silu(hidden[i])).sum();
            assert!((y - logits.get(r, o)).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_rows_give_identical_logits() {
    for kind in ModelKind::ALL {
        let state = perturbed_state(shrunken(kind, vec![6, 4, 3]), 3);
        let row = [0.1, -0.7, 1.2, 0.0, 0.5, -1.9];
        let x = Matrix::from_rows(&[row, row, row]).unwrap();
        let logits = predict(&state, &x).unwrap();
        assert_eq!(logits.row(0), logits.row(1));
        assert_eq!(logits.row(1), logits.row(2));
    }
}

#[test]
fn zero_mlp_gives_uniform_prediction() {
    let state = ModelState::zeros(ModelConfig::standard(ModelKind::Mlp)).unwrap();
    let x = Matrix::zeros(2, MNIST_INPUTS);
    let (logits, _) = mlp_forward(&state, &x).unwrap();
    assert!(logits.as_slice().iter().all(|&v| v == 0.0));
    let out = softmax_cross_entropy(&logits, &[3, 8]).unwrap();
    assert!((out.loss - 10f64.ln()).abs() < 1e-12);
}

#[test]
fn single_hidden_unit_mlp_hand_example() {
    // 2 → 1 → 2: h = relu(1·x0 − 2·x1 + 0.5), y = [3h + 1, −h]
    let cfg = ModelConfig::mlp(vec![2, 1, 2]);
    let state = ModelState::new(cfg, vec![1.0, -2.0, 0.5, 3.0, -1.0, 1.0, 0.0]).unwrap();
    let x = Matrix::from_rows(&[[2.0, 0.25], [0.0, 1.0]]).unwrap();
    let y = predict(&state, &x).unwrap();
    // row 0: h = 2 − 0.5 + 0.5 = 2 → [7, −2]; row 1: h = relu(−1.5) = 0 → [1, 0]
    assert_eq!(y.as_slice(), &[7.0, -2.0, 1.0, 0.0]);
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    for kind in ModelKind::ALL {
        let state = perturbed_state(shrunken(kind, vec![6, 3, 2]), 4);
        let x = random_matrix(3, 6, -1.0, 1.0, &mut RngStream::new(1));
        let (_, cache) = forward(&state, &x).unwrap();
        let g = backward(&state, &cache, &Matrix::zeros(3, 2)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0), "{kind}");
    }
}

#[test]
fn duplicated_batch_has_same_mean_gradient() {
    for kind in ModelKind::ALL {
        let state = perturbed_state(shrunken(kind, vec![6, 3, 2]), 6);
        let row: Vec<f64> = (0..6).map(|i| i as f64 * 0.3 - 0.8).collect();
        let single = Matrix::from_rows(std::slice::from_ref(&row)).unwrap();
        let double = Matrix::from_rows(&[row.clone(), row]).unwrap();
        let grad = |x: &Matrix, labels: &[u8]| {
            let (logits, cache) = forward(&state, x).unwrap();
            let out = softmax_cross_entropy(&logits, labels).unwrap();
            backward(&state, &cache, &out.grad).unwrap()
        };
        let g1 = grad(&single, &[1]);
        let g2 = grad(&double, &[1, 1]);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{kind}");
        }
    }
}

#[test]
fn stale_cache_is_rejected() {
    let mut state = perturbed_state(ModelConfig::mlp(vec![4, 3, 2]), 1);
    let x = Matrix::zeros(1, 4);
    let (_, cache) = forward(&state, &x).unwrap();
    state.params_mut()[0] += 1.0;
    assert!(matches!(
        backward(&state, &cache, &Matrix::zeros(1, 2)),
        Err(Error::Internal(_))
    ));
}

#[test]
fn wrong_input_width_is_config_error() {
    let state = ModelState::zeros(ModelConfig::mlp(vec![4, 2])).unwrap();
    assert!(matches!(
        predict(&state, &Matrix::zeros(1, 5)),
        Err(Error::Config(_))
    ));
    assert!(spline_kan_forward(&state, &Matrix::zeros(1, 4)).is_err());
}

#[test]
fn init_is_deterministic_and_sized() {
    for kind in ModelKind::ALL {
        let cfg = ModelConfig::standard(kind);
        let a = init_params(&cfg, &mut RngStream::new(42)).unwrap();
        let b = init_params(&cfg, &mut RngStream::new(42)).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(a.len(), param_count(&cfg));
        assert!(a.params().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn spline_path_starts_small_relative_to_base_path() {
    let cfg = ModelConfig::standard(ModelKind::SplineKan);
    let state = init_params(&cfg, &mut RngStream::new(3)).unwrap();
    let mut rng = RngStream::new(4);
    let x = random_matrix(16, MNIST_INPUTS, -1.0, 1.0, &mut rng);

    let mut base_only = state.clone();
    let mut spline_only = state.clone();
    for b in state.layout() {
        if b.name == "layers.0.base_weight" {
            spline_only.params_mut()[b.range()].fill(0.0);
        }
        if b.name == "layers.0.spline_scaler" {
            base_only.params_mut()[b.range()].fill(0.0);
        }
    }
    // Compare the first layer's two paths through a one-layer model.
    let one_layer = |s: &ModelState| {
        let mut cfg = cfg.clone();
        cfg.layer_widths = vec![MNIST_INPUTS, 24];
        let n = param_count(&cfg);
        let st = ModelState::new(cfg, s.params()[..n].to_vec()).unwrap();
        predict(&st, &x).unwrap()
    };
    let norm = |m: &Matrix| m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    let ratio = norm(&one_layer(&spline_only)) / norm(&one_layer(&base_only));
    assert!(ratio < 1.0, "spline/base ratio {ratio}");
}

#[test]
fn forward_is_pure() {
    for kind in ModelKind::ALL {
        let state = perturbed_state(shrunken(kind, vec![10, 6, 4]), 8);
        let x = random_matrix(7, 10, -1.0, 1.0, &mut RngStream::new(2));
        let a = predict(&state, &x).unwrap();
        let (b, _) = forward(&state, &x).unwrap();
        assert_eq!(a, b);
        assert_eq!(predict(&state, &x).unwrap(), a);
    }
}
