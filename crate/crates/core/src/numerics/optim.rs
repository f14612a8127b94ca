use crate::error::{Error, Result};

/// Velocity for heavy-ball SGD. Starts at zero; its length is fixed at creation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumBuffer {
    velocity: Vec<f64>,
}

impl MomentumBuffer {
    pub fn zeros(len: usize) -> Self {
        MomentumBuffer {
            velocity: vec![0.0; len],
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn len(&self) -> usize {
        self.velocity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocity.is_empty()
    }
}

/// One step of `v ← μ·v + g; w ← w − lr·v` (no dampening, no Nesterov).
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    buf: &mut MomentumBuffer,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != buf.velocity.len() {
        return Err(Error::internal(format!(
            "sgd step length mismatch: params {}, grads {}, velocity {}",
            params.len(),
            grads.len(),
            buf.velocity.len()
        )));
    }
    for ((w, &g), v) in params.iter_mut().zip(grads).zip(buf.velocity.iter_mut()) {
        *v = momentum * *v + g;
        *w -= lr * *v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_plain_sgd() {
        let mut w = vec![1.0, -2.0];
        let mut buf = MomentumBuffer::zeros(2);
        sgd_momentum_step(&mut w, &[0.5, 1.0], &mut buf, 0.1, 0.9).unwrap();
        assert_eq!(w, vec![1.0 - 0.1 * 0.5, -2.0 - 0.1 * 1.0]);
    }

    #[test]
    fn zero_gradient_coasts_on_velocity() {
        let mut w = vec![0.0];
        let mut buf = MomentumBuffer::zeros(1);
        sgd_momentum_step(&mut w, &[2.0], &mut buf, 0.1, 0.9).unwrap();
        let before = w[0];
        let v = buf.velocity()[0];
        sgd_momentum_step(&mut w, &[0.0], &mut buf, 0.1, 0.9).unwrap();
        assert_eq!(w[0], before - 0.1 * 0.9 * v);
    }

    #[test]
    fn quadratic_trace_matches_unrolled_recurrence() {
        // f(w) = 0.5·a·w², g = a·w. Unrolled by hand with a = 2, w0 = 1, lr = 0.1, μ = 0.9:
        // step 1: g=2,      v=2,       w=0.8
        // step 2: g=1.6,    v=3.4,     w=0.46
        // step 3: g=0.92,   v=3.98,    w=0.062
        let a = 2.0;
        let mut w = vec![1.0];
        let mut buf = MomentumBuffer::zeros(1);
        let expected = [(2.0, 0.8), (3.4, 0.46), (3.98, 0.062)];
        for (v_exp, w_exp) in expected {
            let g = [a * w[0]];
            sgd_momentum_step(&mut w, &g, &mut buf, 0.1, 0.9).unwrap();
            assert!((buf.velocity()[0] - v_exp).abs() < 1e-12);
            assert!((w[0] - w_exp).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_internal_error() {
        let mut w = vec![0.0; 3];
        let mut buf = MomentumBuffer::zeros(2);
        assert!(matches!(
            sgd_momentum_step(&mut w, &[0.0; 3], &mut buf, 0.1, 0.9),
            Err(Error::Internal(_))
        ));
    }
}
