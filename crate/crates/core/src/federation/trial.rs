use std::time::Instant;

use rayon::prelude::*;

use super::{aggregate, aggregation_weights, local_train, sample_clients, server_step};
use super::{ClientUpdate, FederationConfig, ServerState};
use crate::data::{ClientPartition, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, RoundRecord, TrialSummary};
use crate::models::{init_params, ModelConfig};
use crate::numerics::{sequential_sum, RngStream};

/// Everything a trial reads: the normalized splits and the client shards,
/// indexed by client id.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub train: Dataset,
    pub test: Dataset,
    pub partitions: Vec<ClientPartition>,
}

/// Where a trial begins.
#[derive(Debug, Clone, Default)]
#[allow(clippy::large_enum_variant)]
pub enum TrialStart {
    #[default]
    Fresh,
    /// Continue from a server checkpoint and the records logged up to it.
    Resume {
        state: ServerState,
        records: Vec<RoundRecord>,
        elapsed_s: f64,
    },
}

/// Passed to the observer after every round.
pub struct RoundEvent<'a> {
    pub trial_id: &'a str,
    pub state: &'a ServerState,
    pub record: &'a RoundRecord,
}

pub fn run_trial(
    model: &ModelConfig,
    cfg: &FederationConfig,
    data: &TrialData,
    trial_id: &str,
    trial_seed: u64,
) -> Result<TrialSummary> {
    run_trial_with(
        model,
        cfg,
        data,
        trial_id,
        trial_seed,
        TrialStart::Fresh,
        &mut |_| Ok(()),
    )
}

/// Full federated trial. The observer runs after each round (logging,
/// checkpointing); an error from it aborts the trial.
///
/// Randomness is drawn from named substreams of `trial_seed` (`init`,
/// `sample/{round}`, `round/{round}/client/{id}`), so the metrics do not
/// depend on whether clients train serially or in parallel, nor on where a
/// resumed trial picked up.
pub fn run_trial_with(
    model: &ModelConfig,
    cfg: &FederationConfig,
    data: &TrialData,
    trial_id: &str,
    trial_seed: u64,
    start: TrialStart,
    observer: &mut dyn FnMut(RoundEvent<'_>) -> Result<()>,
) -> Result<TrialSummary> {
    cfg.validate()?;
    model.validate()?;
    check_partitions(cfg, data)?;
    let t0 = Instant::now();
    let trial_rng = RngStream::new(trial_seed);
    let (mut state, mut records, prior_s) = match start {
        TrialStart::Fresh => {
            let global = init_params(model, &mut trial_rng.substream("init"))?;
            (ServerState::new(global), Vec::new(), 0.0)
        }
        TrialStart::Resume {
            state,
            records,
            elapsed_s,
        } => {
            if state.global.config() != model {
                return Err(Error::config(
                    "checkpoint model config differs from the requested one",
                ));
            }
            if state.round_index != records.len() || state.round_index > cfg.n_rounds {
                return Err(Error::data(format!(
                    "checkpoint at round {} but {} logged rounds",
                    state.round_index,
                    records.len()
                )));
            }
            (state, records, elapsed_s)
        }
    };

    for round in state.round_index + 1..=cfg.n_rounds {
        let rt = Instant::now();
        let ids = sample_clients(cfg, round, &trial_rng);
        let global = &state.global;
        let train_one = |&c: &usize| -> Result<ClientUpdate> {
            let rng = trial_rng.substream(&format!("round/{round}/client/{c}"));
            local_train(global, &data.train, &data.partitions[c], cfg, rng)
        };
        let updates: Vec<ClientUpdate> = if cfg.parallel_clients {
            ids.par_iter().map(train_one).collect::<Result<_>>()?
        } else {
            ids.iter().map(train_one).collect::<Result<_>>()?
        };
        let avg = aggregate(&updates)?;
        let w = aggregation_weights(&updates);
        let train_loss = sequential_sum(
            &w.iter()
                .zip(&updates)
                .map(|(w, u)| w * u.train_loss)
                .collect::<Vec<_>>(),
        );
        let train_acc = sequential_sum(
            &w.iter()
                .zip(&updates)
                .map(|(w, u)| w * u.train_acc)
                .collect::<Vec<_>>(),
        );
        server_step(&mut state, &avg, cfg.server_momentum, cfg.server_lr)?;
        let eval = evaluate(&state.global, &data.test, cfg.eval_batch_size)?;
        records.push(RoundRecord {
            round,
            test_acc: eval.accuracy,
            test_loss: eval.loss,
            train_acc,
            train_loss,
            sampled_clients: ids,
            elapsed_s: rt.elapsed().as_secs_f64(),
        });
        observer(RoundEvent {
            trial_id,
            state: &state,
            record: records.last().expect("just pushed"),
        })?;
    }

    Ok(TrialSummary {
        trial_id: trial_id.to_string(),
        model: model.kind,
        seed: trial_seed,
        records,
        total_time_s: prior_s + t0.elapsed().as_secs_f64(),
    })
}

fn check_partitions(cfg: &FederationConfig, data: &TrialData) -> Result<()> {
    if data.partitions.len() != cfg.n_clients {
        return Err(Error::config(format!(
            "{} partitions for {} clients",
            data.partitions.len(),
            cfg.n_clients
        )));
    }
    for (i, p) in data.partitions.iter().enumerate() {
        if p.client_id != i {
            return Err(Error::internal(format!(
                "partition {i} has client id {}",
                p.client_id
            )));
        }
        if let Some(&bad) = p.indices.iter().find(|&&j| j >= data.train.len()) {
            return Err(Error::data(format!(
                "client {i} refers to training example {bad}"
            )));
        }
    }
    Ok(())
}
