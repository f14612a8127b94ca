//! Centralized evaluation of the global model and per-trial JSONL logs.

mod log;

pub use log::{read_logs, scan_logs, write_logs, LogFooter, RoundLine};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::models::{predict, ModelKind, ModelState};
use crate::numerics::{sequential_sum, softmax_cross_entropy_rows};

pub const DEFAULT_EVAL_BATCH: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Accuracy (argmax, ties to the lowest class) and mean cross-entropy over
/// `data`, computed in batches of `batch_size`. Per-example losses are summed
/// in dataset order, so the result does not depend on the batch size.
pub fn evaluate(model: &ModelState, data: &Dataset, batch_size: usize) -> Result<Evaluation> {
    let n = data.len();
    let batch_size = batch_size.max(1);
    let starts: Vec<usize> = (0..n).step_by(batch_size).collect();
    let per_batch: Vec<Vec<(f64, bool)>> = starts
        .par_iter()
        .map(|&start| {
            let idx: Vec<usize> = (start..(start + batch_size).min(n)).collect();
            let x = data.images().gather_rows(&idx);
            let logits = predict(model, &x)?;
            softmax_cross_entropy_rows(&logits, &data.labels()[start..start + idx.len()])
        })
        .collect::<Result<_>>()?;
    let losses: Vec<f64> = per_batch.iter().flatten().map(|r| r.0).collect();
    let correct = per_batch.iter().flatten().filter(|r| r.1).count();
    Ok(Evaluation {
        accuracy: correct as f64 / n.max(1) as f64,
        loss: sequential_sum(&losses) / n.max(1) as f64,
    })
}

/// Global-model metrics after one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub test_acc: f64,
    pub test_loss: f64,
    /// Sample-weighted mean over the round's participating clients.
    pub train_acc: f64,
    pub train_loss: f64,
    pub sampled_clients: Vec<usize>,
    /// Wall-clock seconds spent in this round, evaluation included.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial_id: String,
    pub model: ModelKind,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub total_time_s: f64,
}

impl TrialSummary {
    /// Copy with all wall-clock fields zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> TrialSummary {
        let mut t = self.clone();
        t.total_time_s = 0.0;
        for r in &mut t.records {
            r.elapsed_s = 0.0;
        }
        t
    }

    pub fn record(&self, round: usize) -> Option<&RoundRecord> {
        self.records.iter().find(|r| r.round == round)
    }
}
