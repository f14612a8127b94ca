//! Experiment configuration, stored as a flat list of dotted TOML keys.

use std::path::{Path, PathBuf};

use fedkan_core::federation::FederationConfig;
use fedkan_core::models::BaseActivation;
use fedkan_core::{Error, ModelConfig, ModelKind, Result, RngStream};
use serde::{Deserialize, Serialize};

pub const DATA_DIR_ENV: &str = "FEDKAN_DATA_DIR";
pub const OUT_DIR_ENV: &str = "FEDKAN_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub models: Vec<ModelKind>,
    pub trials_per_model: usize,
    pub master_seed: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            models: ModelKind::ALL.to_vec(),
            trials_per_model: 15,
            master_seed: 20240519,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            data_dir: PathBuf::from("data/mnist"),
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSection {
    pub labels_per_client: usize,
}

impl Default for PartitionSection {
    fn default() -> Self {
        PartitionSection {
            labels_per_client: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mlp_hidden: Vec<usize>,
    pub kan_hidden: Vec<usize>,
    pub grid_size: usize,
    pub spline_order: usize,
    pub num_centers: usize,
    pub rbf_base_activation: BaseActivation,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            mlp_hidden: vec![200, 200],
            kan_hidden: vec![24, 24],
            grid_size: 5,
            spline_order: 3,
            num_centers: 8,
            rbf_base_activation: BaseActivation::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeSection {
    /// Threads for intra-round client training; 1 trains serially.
    pub parallel_clients: usize,
    /// Write a server checkpoint every K rounds (0 disables).
    pub checkpoint_every: usize,
}

impl Default for RuntimeSection {
    fn default() -> Self {
        RuntimeSection {
            parallel_clients: 1,
            checkpoint_every: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub paths: PathsSection,
    pub federation: FederationConfig,
    pub partition: PartitionSection,
    pub model: ModelSection,
    pub runtime: RuntimeSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Full protocol: 15 trials per model, 100 rounds.
    Full,
    /// 3 trials per model, 30 rounds.
    Desk,
}

impl ExperimentConfig {
    pub fn apply_preset(&mut self, preset: Preset) {
        match preset {
            Preset::Full => {
                self.experiment.trials_per_model = 15;
                self.federation.n_rounds = 100;
            }
            Preset::Desk => {
                self.experiment.trials_per_model = 3;
                self.federation.n_rounds = 30;
            }
        }
    }

    /// Environment overrides for the data and output directories.
    pub fn apply_env(&mut self) {
        if let Some(v) = std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()) {
            self.paths.data_dir = PathBuf::from(v);
        }
        if let Some(v) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            self.paths.out_dir = PathBuf::from(v);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.models.is_empty() {
            return Err(Error::config("experiment.models is empty"));
        }
        let mut seen = self.experiment.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.experiment.models.len() {
            return Err(Error::config("experiment.models lists a model twice"));
        }
        if self.experiment.trials_per_model == 0 {
            return Err(Error::config(
                "experiment.trials_per_model must be positive",
            ));
        }
        if self.partition.labels_per_client == 0 {
            return Err(Error::config(
                "partition.labels_per_client must be positive",
            ));
        }
        if self.runtime.parallel_clients == 0 {
            return Err(Error::config("runtime.parallel_clients must be at least 1"));
        }
        self.federation.validate()?;
        for kind in &self.experiment.models {
            self.model_config(*kind).validate()?;
        }
        Ok(())
    }

    pub fn model_config(&self, kind: ModelKind) -> ModelConfig {
        let m = &self.model;
        let widths = |hidden: &[usize]| {
            let mut w = vec![fedkan_core::models::MNIST_INPUTS];
            w.extend_from_slice(hidden);
            w.push(fedkan_core::models::MNIST_CLASSES);
            w
        };
        let mut c = match kind {
            ModelKind::Mlp => ModelConfig::mlp(widths(&m.mlp_hidden)),
            ModelKind::SplineKan => ModelConfig::spline_kan(widths(&m.kan_hidden)),
            ModelKind::RbfKan => ModelConfig::rbf_kan(widths(&m.kan_hidden)),
        };
        c.grid_size = m.grid_size;
        c.spline_order = m.spline_order;
        c.num_centers = m.num_centers;
        c.rbf_base_activation = m.rbf_base_activation;
        c
    }

    /// Seed of trial `k` of `kind`; each trial can be rerun on its own.
    pub fn trial_seed(&self, kind: ModelKind, k: usize) -> u64 {
        RngStream::new(self.experiment.master_seed).derive_seed(&format!("trial/{kind}/{k}"))
    }

    /// Seed of the single client partition shared by every trial.
    pub fn partition_seed(&self) -> u64 {
        RngStream::new(self.experiment.master_seed).derive_seed("partition")
    }

    /// Fields that change results. Trial counts, model selection, paths and
    /// runtime settings are excluded so an experiment can be extended or moved.
    pub fn result_fingerprint(&self) -> String {
        let mut c = self.clone();
        c.experiment.models.clear();
        c.experiment.trials_per_model = 0;
        c.paths = PathsSection::default();
        c.runtime = RuntimeSection::default();
        use sha2::Digest;
        hex::encode(sha2::Sha256::digest(c.dump().as_bytes()))
    }

    /// Flat `section.key = value` lines.
    pub fn dump(&self) -> String {
        let value = toml::Value::try_from(self).expect("config is serializable");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let c = ExperimentConfig::default();
        let dump = c.dump();
        for line in [
            "federation.n_rounds = 100",
            "federation.clients_per_round_fraction = 0.1",
            "federation.local_epochs = 5",
            "federation.batch_size = 64",
            "federation.lr = 0.1",
            "federation.client_momentum = 0.9",
            "federation.server_momentum = 0.9",
            "federation.n_clients = 100",
            "experiment.trials_per_model = 15",
            "partition.labels_per_client = 2",
            "model.kan_hidden = [24, 24]",
            "model.mlp_hidden = [200, 200]",
            "model.grid_size = 5",
            "model.spline_order = 3",
            "model.num_centers = 8",
        ] {
            assert!(
                dump.lines().any(|l| l == line),
                "missing `{line}` in\n{dump}"
            );
        }
        assert!(dump.lines().all(|l| !l.starts_with('[')));
    }

    #[test]
    fn dump_load_round_trip() {
        let mut c = ExperimentConfig::default();
        c.apply_preset(Preset::Desk);
        c.experiment.models = vec![ModelKind::Mlp];
        c.federation.lr = 0.037;
        c.model.rbf_base_activation = BaseActivation::Silu;
        assert_eq!(ExperimentConfig::parse(&c.dump()).unwrap(), c);
        assert_eq!(
            ExperimentConfig::parse(&ExperimentConfig::default().dump()).unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn partial_files_and_typos() {
        let c = ExperimentConfig::parse("federation.n_rounds = 7\nexperiment.models = [\"mlp\"]\n")
            .unwrap();
        assert_eq!(c.federation.n_rounds, 7);
        assert_eq!(c.federation.batch_size, 64);
        assert!(ExperimentConfig::parse("federation.n_round = 7").is_err());
    }

    #[test]
    fn standard_widths_and_seeds() {
        let c = ExperimentConfig::default();
        for kind in ModelKind::ALL {
            assert_eq!(c.model_config(kind), ModelConfig::standard(kind));
        }
        assert_ne!(
            c.trial_seed(ModelKind::Mlp, 0),
            c.trial_seed(ModelKind::Mlp, 1)
        );
        assert_ne!(
            c.trial_seed(ModelKind::Mlp, 0),
            c.trial_seed(ModelKind::SplineKan, 0)
        );
        let mut d = c.clone();
        d.experiment.trials_per_model = 3;
        d.paths.out_dir = "elsewhere".into();
        assert_eq!(c.result_fingerprint(), d.result_fingerprint());
        d.federation.lr = 0.2;
        assert_ne!(c.result_fingerprint(), d.result_fingerprint());
    }
}
