//! `fedkan` command-line tool: run trial batches, inspect partitions,
//! build report tables and fetch MNIST.

pub mod config;
mod fetch;
mod partition;
mod report;
mod run;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fedkan_core::ModelKind;

pub use config::{ExperimentConfig, Preset};
pub use fetch::{verify_mnist_dir, MNIST_SHA256};
pub use run::{trial_log_path, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: msg.into(),
        }
    }

    fn with_context(mut self, ctx: &str) -> Self {
        self.message = format!("{} {ctx}", self.message);
        self
    }

    /// Wraps a core error raised while reading input data.
    fn input(e: fedkan_core::Error) -> Self {
        match e {
            fedkan_core::Error::Config(_) => CliError::from(e),
            other => CliError::data(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<fedkan_core::Error> for CliError {
    fn from(e: fedkan_core::Error) -> Self {
        use fedkan_core::Error as E;
        let code = match &e {
            E::Config(_) => EXIT_USAGE,
            E::Data { .. } | E::Parse { .. } | E::Report(_) | E::InsufficientData { .. } => {
                EXIT_DATA
            }
            _ => EXIT_RUNTIME,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "fedkan",
    version,
    about = "Federated KAN vs MLP experiments on MNIST"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run (or resume) the configured trials.
    Run(RunArgs),
    /// Build the client partition and report its label and size distribution.
    Partition(PartitionArgs),
    /// Summarize trial logs into the accuracy, significance and timing tables.
    Report(ReportArgs),
    /// Download MNIST and verify the checksums.
    FetchData(FetchArgs),
}

/// Options shared by commands that resolve an experiment config.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Config file with dotted keys (see `run --dump-config`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory with the four MNIST IDX files [env: FEDKAN_DATA_DIR].
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Comma-separated subset of spline_kan, rbf_kan, mlp.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Output directory [env: FEDKAN_OUT_DIR].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Threads for training the clients of a round in parallel.
    #[arg(long)]
    parallel_clients: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Print the resolved config and exit.
    #[arg(long)]
    dump_config: bool,
    /// No per-round progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Where to write partition.csv / partition.json.
    #[arg(long, default_value = "partition")]
    out: PathBuf,
    /// Also report size ranges for this many consecutive master seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory scanned recursively for trial logs.
    log_dir: PathBuf,
    /// Output directory for the CSV tables (default: <LOG_DIR>/report).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rounds to tabulate (default: every tenth round).
    #[arg(long, value_delimiter = ',')]
    rounds: Option<Vec<usize>>,
    /// Model groups that must be present (the MLP baseline always is).
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long, default_value_t = fedkan_core::stats::DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    conf: f64,
    /// Seed of the bootstrap resampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FetchArgs {
    /// Destination directory [env: FEDKAN_DATA_DIR].
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Archive URL, local archive path, or a directory holding the IDX files
    /// (plain or .gz).
    #[arg(long, default_value = fetch::DEFAULT_SOURCE)]
    source: String,
    /// Re-download even if verified files are present.
    #[arg(long)]
    force: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = self.preset {
            cfg.apply_preset(p);
        }
        cfg.apply_env();
        if let Some(s) = self.seed {
            cfg.experiment.master_seed = s;
        }
        if let Some(d) = &self.data_dir {
            cfg.paths.data_dir = d.clone();
        }
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run(a) => {
            let mut cfg = a.common.resolve()?;
            if let Some(m) = a.models {
                cfg.experiment.models = m;
            }
            if let Some(t) = a.trials {
                cfg.experiment.trials_per_model = t;
            }
            if let Some(r) = a.rounds {
                cfg.federation.n_rounds = r;
            }
            if let Some(o) = a.out_dir {
                cfg.paths.out_dir = o;
            }
            if let Some(p) = a.parallel_clients {
                cfg.runtime.parallel_clients = p;
            }
            if let Some(k) = a.checkpoint_every {
                cfg.runtime.checkpoint_every = k;
            }
            cfg.validate()?;
            if a.dump_config {
                print!("{}", cfg.dump());
                return Ok(());
            }
            run::cmd_run(&cfg, a.quiet)
        }
        Command::Partition(a) => {
            let cfg = a.common.resolve()?;
            cfg.validate()?;
            partition::cmd_partition(&cfg, &a.out, a.seeds)
        }
        Command::Report(a) => {
            let out = a.out.unwrap_or_else(|| a.log_dir.join("report"));
            let mut opts = fedkan_core::stats::ReportOptions {
                rounds: a.rounds,
                resamples: a.resamples,
                conf: a.conf,
                seed: a.seed,
                ..Default::default()
            };
            if let Some(m) = a.models {
                opts.models = m;
            }
            report::cmd_report(&a.log_dir, &out, &opts)
        }
        Command::FetchData(a) => {
            let dir = a
                .data_dir
                .or_else(|| {
                    std::env::var_os(config::DATA_DIR_ENV)
                        .filter(|v| !v.is_empty())
                        .map(PathBuf::from)
                })
                .unwrap_or_else(|| config::PathsSection::default().data_dir);
            fetch::cmd_fetch(&dir, &a.source, a.force)
        }
    }
}
