//! Federated learning simulator comparing Kolmogorov-Arnold networks (B-spline
//! and Gaussian RBF edge functions) against an MLP baseline on MNIST under a
//! pathological non-IID client partition.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, activations, loss, SGD with momentum, RNG streams
//! - [`models`]: the three classifiers with hand-derived backward passes
//! - [`data`]: IDX loading, normalization and the two-labels-per-client partitioner
//! - [`federation`]: client sampling, local training, FedAvg with server momentum
//! - [`metrics`]: centralized evaluation and JSONL trial logs
//! - [`stats`]: summaries, one-sided Welch tests and bootstrap ratio intervals

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod stats;

pub use data::{ClientPartition, Dataset, Split};
pub use error::{Error, Result};
pub use federation::{FederationConfig, ServerState, TrialData};
pub use metrics::{RoundRecord, TrialSummary};
pub use models::{ModelConfig, ModelKind, ModelState};
pub use numerics::{Matrix, MomentumBuffer, RngStream};
