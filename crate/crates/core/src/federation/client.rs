use super::FederationConfig;
use crate::data::{ClientPartition, Dataset};
use crate::error::{Error, Result};
use crate::models::{backward, forward, ModelState};
use crate::numerics::{sgd_momentum_step, softmax_cross_entropy, MomentumBuffer, RngStream};

/// Result of one client's local training.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    /// Local final parameters minus the global parameters received.
    pub delta: Vec<f64>,
    pub n_samples: usize,
    /// Sample-weighted mean over the batches of the last local epoch.
    pub train_loss: f64,
    pub train_acc: f64,
}

/// Client ids participating in `round`, ascending. Uniform without
/// replacement within a round and independent across rounds; depends only on
/// the trial stream seed and the round index.
pub fn sample_clients(cfg: &FederationConfig, round: usize, trial_rng: &RngStream) -> Vec<usize> {
    let mut rng = trial_rng.substream(&format!("sample/{round}"));
    let mut ids = rng.sample_without_replacement(cfg.n_clients, cfg.clients_per_round());
    ids.sort_unstable();
    ids
}

/// Runs `local_epochs` of minibatch SGD with a fresh momentum buffer on the
/// client's shard, reshuffling every epoch with `rng`.
pub fn local_train(
    global: &ModelState,
    train: &Dataset,
    part: &ClientPartition,
    cfg: &FederationConfig,
    mut rng: RngStream,
) -> Result<ClientUpdate> {
    if part.indices.is_empty() {
        return Err(Error::internal(format!(
            "client {} has no data",
            part.client_id
        )));
    }
    let mut local = global.clone();
    let mut buf = MomentumBuffer::zeros(local.len());
    let mut order = part.indices.clone();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for epoch in 0..cfg.local_epochs {
        rng.shuffle(&mut order);
        let last = epoch + 1 == cfg.local_epochs;
        for batch in order.chunks(cfg.batch_size) {
            let x = train.images().gather_rows(batch);
            let y: Vec<u8> = batch.iter().map(|&i| train.labels()[i]).collect();
            let (logits, cache) = forward(&local, &x)?;
            let out = softmax_cross_entropy(&logits, &y)?;
            if last {
                loss_sum += out.loss * batch.len() as f64;
                correct += out.correct;
            }
            let grads = backward(&local, &cache, &out.grad)?;
            sgd_momentum_step(
                local.params_mut(),
                &grads,
                &mut buf,
                cfg.lr,
                cfg.client_momentum,
            )?;
        }
    }
    let n = order.len();
    let delta = local
        .params()
        .iter()
        .zip(global.params())
        .map(|(l, g)| l - g)
        .collect();
    Ok(ClientUpdate {
        client_id: part.client_id,
        delta,
        n_samples: n,
        train_loss: loss_sum / n as f64,
        train_acc: correct as f64 / n as f64,
    })
}
