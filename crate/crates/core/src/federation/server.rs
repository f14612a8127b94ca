use super::ClientUpdate;
use crate::error::{Error, Result};
use crate::models::checkpoint::Checkpoint;
use crate::models::ModelState;

const MOMENTUM_VECTOR: &str = "server_momentum";

/// Global model plus the server momentum that persists across rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub global: ModelState,
    pub momentum: Vec<f64>,
    /// Number of completed rounds.
    pub round_index: usize,
}

impl ServerState {
    pub fn new(global: ModelState) -> Self {
        let momentum = vec![0.0; global.len()];
        ServerState {
            global,
            momentum,
            round_index: 0,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.global.clone(),
            round_index: Some(self.round_index as u64),
            extras: vec![(MOMENTUM_VECTOR.into(), self.momentum.clone())],
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let momentum = ckpt
            .extra(MOMENTUM_VECTOR)
            .ok_or_else(|| Error::data("checkpoint has no server momentum"))?
            .to_vec();
        if momentum.len() != ckpt.model.len() {
            return Err(Error::data(
                "server momentum length does not match parameters",
            ));
        }
        let round_index =
            ckpt.round_index
                .ok_or_else(|| Error::data("checkpoint has no round index"))? as usize;
        Ok(ServerState {
            global: ckpt.model,
            momentum,
            round_index,
        })
    }
}

/// `n_k / Σ n`, in the order of `updates`.
pub fn aggregation_weights(updates: &[ClientUpdate]) -> Vec<f64> {
    let total: usize = updates.iter().map(|u| u.n_samples).sum();
    updates
        .iter()
        .map(|u| u.n_samples as f64 / total as f64)
        .collect()
}

/// Sample-weighted mean of the client deltas, accumulated in ascending client
/// id order regardless of the order of `updates`.
pub fn aggregate(updates: &[ClientUpdate]) -> Result<Vec<f64>> {
    let first = updates
        .first()
        .ok_or_else(|| Error::internal("aggregate called with no updates"))?;
    let len = first.delta.len();
    if let Some(bad) = updates.iter().find(|u| u.delta.len() != len) {
        return Err(Error::internal(format!(
            "client {} delta has length {}, expected {len}",
            bad.client_id,
            bad.delta.len()
        )));
    }
    if updates.iter().any(|u| u.n_samples == 0) {
        return Err(Error::internal("update with zero samples"));
    }
    let mut sorted: Vec<&ClientUpdate> = updates.iter().collect();
    sorted.sort_by_key(|u| u.client_id);
    let total: usize = sorted.iter().map(|u| u.n_samples).sum();
    let mut avg = vec![0.0; len];
    for u in sorted {
        let w = u.n_samples as f64 / total as f64;
        for (a, d) in avg.iter_mut().zip(&u.delta) {
            *a += w * d;
        }
    }
    Ok(avg)
}

/// `m ← β·m + Δ; w ← w + server_lr·m`, then advances the round counter.
pub fn server_step(
    state: &mut ServerState,
    avg_delta: &[f64],
    server_momentum: f64,
    server_lr: f64,
) -> Result<()> {
    if avg_delta.len() != state.momentum.len() || avg_delta.len() != state.global.len() {
        return Err(Error::internal(format!(
            "server step length mismatch: delta {}, momentum {}, params {}",
            avg_delta.len(),
            state.momentum.len(),
            state.global.len()
        )));
    }
    for ((w, m), d) in state
        .global
        .params_mut()
        .iter_mut()
        .zip(state.momentum.iter_mut())
        .zip(avg_delta)
    {
        *m = server_momentum * *m + d;
        *w += server_lr * *m;
    }
    state.round_index += 1;
    Ok(())
}
