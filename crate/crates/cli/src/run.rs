//! `fedkan run`: every configured trial, one JSONL log each, with a manifest
//! of completed trials so interrupted batches resume where they stopped.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use fedkan_core::data::{
    load_mnist, pathological_partition, read_partitions_json, write_partitions_json,
};
use fedkan_core::federation::{run_trial_with, RoundEvent, TrialData, TrialStart};
use fedkan_core::metrics::{write_logs, RoundLine};
use fedkan_core::models::checkpoint::Checkpoint;
use fedkan_core::{Error, ModelKind, RngStream, RoundRecord, ServerState};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub model: ModelKind,
    pub trial: usize,
    pub seed: u64,
    /// Relative to the output directory.
    pub log: PathBuf,
    pub rounds: usize,
    pub total_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fingerprint: String,
    pub trials: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    fn write(&self, path: &Path) -> CliResult<()> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("serializable") + "\n";
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn find(&self, model: ModelKind, trial: usize) -> Option<&ManifestEntry> {
        self.trials
            .iter()
            .find(|e| e.model == model && e.trial == trial)
    }
}

pub fn trial_log_path(out_dir: &Path, kind: ModelKind, k: usize) -> PathBuf {
    out_dir
        .join(kind.as_str())
        .join(format!("trial_{k:03}.jsonl"))
}

fn trial_id(kind: ModelKind, k: usize) -> String {
    format!("{kind}-{k:03}")
}

pub fn cmd_run(cfg: &ExperimentConfig, quiet: bool) -> CliResult<()> {
    let out = &cfg.paths.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let manifest_path = out.join("manifest.json");
    let fingerprint = cfg.result_fingerprint();
    let mut manifest = if manifest_path.exists() {
        let m = Manifest::read(&manifest_path)?;
        if m.fingerprint != fingerprint {
            return Err(CliError::usage(format!(
                "{} holds results of a different configuration; choose another output directory",
                out.display()
            )));
        }
        m
    } else {
        Manifest {
            fingerprint,
            trials: Vec::new(),
        }
    };
    let cfg_path = out.join("config.toml");
    std::fs::write(&cfg_path, cfg.dump()).map_err(|e| Error::io(&cfg_path, e))?;

    let (train, test) = load_mnist(&cfg.paths.data_dir).map_err(|e| {
        CliError::data(format!(
            "cannot load MNIST from {}: {e} (run `fedkan fetch-data` or set FEDKAN_DATA_DIR)",
            cfg.paths.data_dir.display()
        ))
    })?;
    let partitions = pathological_partition(
        train.labels(),
        cfg.federation.n_clients,
        cfg.partition.labels_per_client,
        &mut RngStream::new(cfg.partition_seed()),
    )?;
    let part_path = out.join("partition.json");
    if part_path.exists() {
        if read_partitions_json(&part_path).map_err(CliError::input)? != partitions {
            return Err(CliError::data(format!(
                "{} does not match the configured partition",
                part_path.display()
            )));
        }
    } else {
        write_partitions_json(&partitions, &part_path)?;
    }
    let data = TrialData {
        train,
        test,
        partitions,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.runtime.parallel_clients)
        .build()
        .map_err(|e| CliError::from(Error::internal(format!("thread pool: {e}"))))?;
    let mut fed = cfg.federation.clone();
    fed.parallel_clients = cfg.runtime.parallel_clients > 1;

    let total = cfg.experiment.models.len() * cfg.experiment.trials_per_model;
    let mut done = 0;
    for &kind in &cfg.experiment.models {
        for k in 0..cfg.experiment.trials_per_model {
            done += 1;
            let log = trial_log_path(out, kind, k);
            if manifest.find(kind, k).is_some() && log.exists() {
                if !quiet {
                    eprintln!("[{done}/{total}] {} already complete", trial_id(kind, k));
                }
                continue;
            }
            let ctx = TrialCtx {
                cfg,
                fed: &fed,
                data: &data,
                kind,
                k,
                log: &log,
                quiet,
                label: format!("[{done}/{total}]"),
            };
            let entry = pool.install(|| run_one(&ctx))?;
            manifest
                .trials
                .retain(|e| !(e.model == kind && e.trial == k));
            manifest.trials.push(ManifestEntry {
                log: log.strip_prefix(out).unwrap_or(&log).to_path_buf(),
                ..entry
            });
            manifest.trials.sort_by_key(|e| (e.model, e.trial));
            manifest.write(&manifest_path)?;
        }
    }
    if !quiet {
        eprintln!("all {total} trials complete in {}", out.display());
    }
    Ok(())
}

struct TrialCtx<'a> {
    cfg: &'a ExperimentConfig,
    fed: &'a fedkan_core::FederationConfig,
    data: &'a TrialData,
    kind: ModelKind,
    k: usize,
    log: &'a Path,
    quiet: bool,
    label: String,
}

fn partial_path(log: &Path) -> PathBuf {
    log.with_extension("jsonl.partial")
}

fn checkpoint_path(log: &Path) -> PathBuf {
    log.with_extension("ckpt")
}

fn read_partial(path: &Path, n: usize) -> CliResult<Option<Vec<RoundRecord>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for line in BufReader::new(f).lines().take(n) {
        let line = line.map_err(|e| Error::io(path, e))?;
        let Ok(r) = serde_json::from_str::<RoundLine>(&line) else {
            return Ok(None);
        };
        records.push(RoundRecord {
            round: r.round,
            test_acc: r.test_acc,
            test_loss: r.test_loss,
            train_acc: r.train_acc,
            train_loss: r.train_loss,
            sampled_clients: r.sampled_clients,
            elapsed_s: r.elapsed_s,
        });
    }
    let consistent =
        records.len() == n && records.iter().enumerate().all(|(i, r)| r.round == i + 1);
    Ok(consistent.then_some(records))
}

/// Resume point from a checkpoint plus the partial log written before it.
fn resume_point(ctx: &TrialCtx<'_>) -> CliResult<TrialStart> {
    let (ckpt, partial) = (checkpoint_path(ctx.log), partial_path(ctx.log));
    if !ckpt.exists() || !partial.exists() {
        return Ok(TrialStart::Fresh);
    }
    let state = ServerState::from_checkpoint(Checkpoint::read(&ckpt).map_err(CliError::input)?)
        .map_err(CliError::input)?;
    if state.global.config() != &ctx.cfg.model_config(ctx.kind) {
        return Ok(TrialStart::Fresh);
    }
    match read_partial(&partial, state.round_index)? {
        Some(records) => {
            let elapsed_s = records.iter().map(|r| r.elapsed_s).sum();
            Ok(TrialStart::Resume {
                state,
                records,
                elapsed_s,
            })
        }
        None => Ok(TrialStart::Fresh),
    }
}

fn round_line(trial_id: &str, kind: ModelKind, r: &RoundRecord) -> String {
    let line = RoundLine {
        trial_id: trial_id.to_string(),
        model: kind,
        round: r.round,
        test_acc: r.test_acc,
        test_loss: r.test_loss,
        train_acc: r.train_acc,
        train_loss: r.train_loss,
        sampled_clients: r.sampled_clients.clone(),
        elapsed_s: r.elapsed_s,
    };
    serde_json::to_string(&line).expect("serializable")
}

fn run_one(ctx: &TrialCtx<'_>) -> CliResult<ManifestEntry> {
    let (kind, k) = (ctx.kind, ctx.k);
    let id = trial_id(kind, k);
    let seed = ctx.cfg.trial_seed(kind, k);
    let dir = ctx.log.parent().expect("log path has a parent");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (partial, ckpt) = (partial_path(ctx.log), checkpoint_path(ctx.log));

    let start = resume_point(ctx)?;
    // Rewrite the partial log so it ends exactly at the resume point.
    let mut partial_file = File::create(&partial).map_err(|e| Error::io(&partial, e))?;
    if let TrialStart::Resume { records, .. } = &start {
        for r in records {
            writeln!(partial_file, "{}", round_line(&id, kind, r))
                .map_err(|e| Error::io(&partial, e))?;
        }
        if !ctx.quiet {
            eprintln!("{} {id} resuming after round {}", ctx.label, records.len());
        }
    }
    drop(partial_file);
    let mut partial_file = OpenOptions::new()
        .append(true)
        .open(&partial)
        .map_err(|e| Error::io(&partial, e))?;

    let n_rounds = ctx.fed.n_rounds;
    let every = ctx.cfg.runtime.checkpoint_every;
    let mut observer = |ev: RoundEvent<'_>| -> fedkan_core::Result<()> {
        let r = ev.record;
        writeln!(partial_file, "{}", round_line(ev.trial_id, kind, r))
            .and_then(|_| partial_file.flush())
            .map_err(|e| Error::io(&partial, e))?;
        if every > 0 && r.round.is_multiple_of(every) && r.round < n_rounds {
            ev.state.to_checkpoint().write(&ckpt)?;
        }
        if !ctx.quiet {
            eprintln!(
                "{} {} round {}/{}: test_acc {:.4} test_loss {:.4} train_acc {:.4} ({:.1}s)",
                ctx.label,
                ev.trial_id,
                r.round,
                n_rounds,
                r.test_acc,
                r.test_loss,
                r.train_acc,
                r.elapsed_s
            );
        }
        Ok(())
    };
    let summary = run_trial_with(
        &ctx.cfg.model_config(kind),
        ctx.fed,
        ctx.data,
        &id,
        seed,
        start,
        &mut observer,
    )?;
    write_logs(&summary, ctx.log)?;
    for p in [&partial, &ckpt] {
        if p.exists() {
            std::fs::remove_file(p).map_err(|e| Error::io(p, e))?;
        }
    }
    Ok(ManifestEntry {
        model: kind,
        trial: k,
        seed,
        log: ctx.log.to_path_buf(),
        rounds: summary.records.len(),
        total_time_s: summary.total_time_s,
    })
}
