//! Simulated cross-device federation: per-round client sampling, local SGD
//! with momentum, sample-weighted FedAvg and server-side momentum.

mod client;
mod server;
mod trial;

pub use client::{local_train, sample_clients, ClientUpdate};
pub use server::{aggregate, aggregation_weights, server_step, ServerState};
pub use trial::{run_trial, run_trial_with, RoundEvent, TrialData, TrialStart};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub n_rounds: usize,
    pub n_clients: usize,
    pub clients_per_round_fraction: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub client_momentum: f64,
    pub server_momentum: f64,
    pub server_lr: f64,
    pub eval_batch_size: usize,
    /// Train the sampled clients of a round on the rayon pool. An execution
    /// detail with no effect on results, so it is not serialized.
    #[serde(skip)]
    pub parallel_clients: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            n_rounds: 100,
            n_clients: 100,
            clients_per_round_fraction: 0.1,
            local_epochs: 5,
            batch_size: 64,
            lr: 0.1,
            client_momentum: 0.9,
            server_momentum: 0.9,
            server_lr: 1.0,
            eval_batch_size: crate::metrics::DEFAULT_EVAL_BATCH,
            parallel_clients: false,
        }
    }
}

impl FederationConfig {
    /// Number of clients drawn each round, at least one.
    pub fn clients_per_round(&self) -> usize {
        ((self.clients_per_round_fraction * self.n_clients as f64).round() as usize)
            .clamp(1, self.n_clients.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.clients_per_round_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::config(format!(
                "clients_per_round_fraction must be in (0, 1], got {f}"
            )));
        }
        for (name, v) in [
            ("n_rounds", self.n_rounds),
            ("n_clients", self.n_clients),
            ("local_epochs", self.local_epochs),
            ("batch_size", self.batch_size),
            ("eval_batch_size", self.eval_batch_size),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("lr", self.lr),
            ("client_momentum", self.client_momentum),
            ("server_momentum", self.server_momentum),
            ("server_lr", self.server_lr),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}
