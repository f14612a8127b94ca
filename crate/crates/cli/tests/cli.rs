use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use fedkan_core::metrics::{read_logs, write_logs};
use fedkan_core::{ModelKind, RoundRecord, TrialSummary};

fn fedkan() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fedkan"));
    c.env_remove("FEDKAN_DATA_DIR").env_remove("FEDKAN_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    fedkan().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("FEDKAN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    if fedkan_cli::verify_mnist_dir(&dir).is_ok() {
        Some(dir)
    } else {
        eprintln!("MNIST not found in {}; skipping", dir.display());
        None
    }
}

#[test]
fn default_config_dump_has_protocol_values() {
    let o = run(&["run", "--dump-config"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for line in [
        "experiment.trials_per_model = 15",
        "federation.n_rounds = 100",
        "federation.clients_per_round_fraction = 0.1",
        "federation.local_epochs = 5",
        "federation.batch_size = 64",
        "federation.lr = 0.1",
        "federation.client_momentum = 0.9",
    ] {
        assert!(text.lines().any(|l| l == line), "{line}");
    }
    let desk = stdout(&run(&["run", "--preset", "desk", "--dump-config"]));
    assert!(desk.contains("experiment.trials_per_model = 3\n"));
    assert!(desk.contains("federation.n_rounds = 30\n"));
}

#[test]
fn config_file_round_trips_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let first = stdout(&run(&[
        "run",
        "--preset",
        "desk",
        "--seed",
        "9",
        "--models",
        "mlp,rbf_kan",
        "--dump-config",
    ]));
    std::fs::write(&cfg, &first).unwrap();
    let second = stdout(&run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--dump-config",
    ]));
    assert_eq!(first, second);
}

#[test]
fn env_overrides_paths() {
    let o = fedkan()
        .args(["run", "--dump-config"])
        .env("FEDKAN_OUT_DIR", "/tmp/somewhere")
        .env("FEDKAN_DATA_DIR", "/tmp/mnist-here")
        .output()
        .unwrap();
    let text = stdout(&o);
    assert!(
        text.contains("paths.out_dir = \"/tmp/somewhere\""),
        "{text}"
    );
    assert!(text.contains("paths.data_dir = \"/tmp/mnist-here\""));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        run(&["run", "--models", "cnn", "--dump-config"])
            .status
            .code(),
        Some(1)
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "federation.n_round = 3\n").unwrap();
    assert_eq!(
        run(&["run", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["run", "--trials", "0", "--dump-config"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn missing_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--data-dir",
        dir.path().join("nothing").to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fetch-data"));
}

fn fixture_trial(model: ModelKind, k: usize, acc: f64, time: f64) -> TrialSummary {
    TrialSummary {
        trial_id: format!("{model}-{k:03}"),
        model,
        seed: k as u64,
        records: (1..=20)
            .map(|r| RoundRecord {
                round: r,
                test_acc: acc + 0.01 * k as f64 + 0.001 * r as f64,
                test_loss: 1.0,
                train_acc: acc,
                train_loss: 1.0,
                sampled_clients: vec![1, 2],
                elapsed_s: 0.1,
            })
            .collect(),
        total_time_s: time + k as f64,
    }
}

fn write_fixture_logs(dir: &Path, models: &[ModelKind]) {
    for &m in models {
        let sub = dir.join(m.as_str());
        std::fs::create_dir_all(&sub).unwrap();
        let (acc, time) = match m {
            ModelKind::SplineKan => (0.5, 30.0),
            ModelKind::RbfKan => (0.2, 25.0),
            ModelKind::Mlp => (0.3, 10.0),
        };
        for k in 0..3 {
            write_logs(
                &fixture_trial(m, k, acc, time),
                &sub.join(format!("trial_{k:03}.jsonl")),
            )
            .unwrap();
        }
    }
}

#[test]
fn report_from_fixture_logs() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_logs(dir.path(), &ModelKind::ALL);
    let o = run(&[
        "report",
        dir.path().to_str().unwrap(),
        "--resamples",
        "1000",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("MLP"));
    assert!(text.contains(" 1.00x  baseline"), "{text}");
    // Spline mean at round 10 = 0.5 + 0.01 + 0.01; MLP = 0.3 + 0.01 + 0.01; difference 0.2.
    assert!(text.contains("+0.2000"), "{text}");
    let t2 = std::fs::read_to_string(dir.path().join("report/accuracy.csv")).unwrap();
    assert!(t2.starts_with("model,round,n,mean,std_dev,std_error\n"));
    assert_eq!(t2.lines().count(), 1 + 3 * 2);
    let t4 = std::fs::read_to_string(dir.path().join("report/timing.csv")).unwrap();
    assert!(t4.lines().any(|l| l.starts_with("mlp,3,11,1,1,")), "{t4}");
    assert!(dir.path().join("report/curves.csv").exists());
}

#[test]
fn report_without_baseline_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_logs(dir.path(), &[ModelKind::SplineKan]);
    let o = run(&[
        "report",
        dir.path().to_str().unwrap(),
        "--models",
        "spline_kan",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no trials found for model mlp"));
    assert_eq!(
        run(&["report", "/definitely/not/here"]).status.code(),
        Some(2)
    );
}

#[test]
fn fetch_rejects_bad_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("mirror");
    std::fs::create_dir_all(&src).unwrap();
    for (name, _) in fedkan_cli::MNIST_SHA256 {
        std::fs::write(src.join(name), b"not mnist").unwrap();
    }
    let o = run(&[
        "fetch-data",
        "--data-dir",
        dir.path().join("dest").to_str().unwrap(),
        "--source",
        src.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sha256"));
}

#[test]
fn fetch_from_local_mirror() {
    let Some(mnist) = mnist_dir() else { return };
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("dest");
    let o = run(&[
        "fetch-data",
        "--data-dir",
        dest.to_str().unwrap(),
        "--source",
        mnist.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(fedkan_cli::verify_mnist_dir(&dest).is_ok());
    let again = run(&[
        "fetch-data",
        "--data-dir",
        dest.to_str().unwrap(),
        "--source",
        "/nowhere",
    ]);
    assert!(stdout(&again).contains("already present"));
}

#[test]
fn partition_summary() {
    let Some(mnist) = mnist_dir() else { return };
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let o = run(&[
        "partition",
        "--data-dir",
        mnist.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "3",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert_eq!(text.matches("mean 600.0").count(), 3, "{text}");
    let csv = std::fs::read_to_string(out.join("partition.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 200);
    assert_eq!(
        std::fs::read_to_string(out.join("sizes.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

fn run_args<'a>(mnist: &'a str, out: &'a str, rounds: &'a str) -> Vec<&'a str> {
    vec![
        "run",
        "--data-dir",
        mnist,
        "--out-dir",
        out,
        "--models",
        "mlp",
        "--trials",
        "1",
        "--rounds",
        rounds,
        "--quiet",
    ]
}

#[test]
fn smoke_run_and_skip_on_rerun() {
    let Some(mnist) = mnist_dir() else { return };
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = run_args(mnist.to_str().unwrap(), out.to_str().unwrap(), "2");
    let o = run(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let log = fedkan_cli::trial_log_path(&out, ModelKind::Mlp, 0);
    let t = read_logs(&log).unwrap();
    assert_eq!(t.records.len(), 2);
    assert_eq!(t.records[0].sampled_clients.len(), 10);
    let bytes = std::fs::read(&log).unwrap();
    let manifest = fedkan_cli::Manifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.trials.len(), 1);

    let again = fedkan().args(&args[..args.len() - 1]).output().unwrap();
    assert_eq!(again.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&again.stderr).contains("already complete"));
    assert_eq!(std::fs::read(&log).unwrap(), bytes);

    // Same directory, different hyperparameters.
    let mut other = args.clone();
    other.extend(["--seed", "5"]);
    assert_eq!(run(&other).status.code(), Some(1));
}

#[test]
fn interrupted_run_resumes_to_identical_metrics() {
    let Some(mnist) = mnist_dir() else { return };
    let dir = tempfile::tempdir().unwrap();
    let mnist = mnist.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut args = run_args(mnist, a.to_str().unwrap(), "6");
    args.extend(["--checkpoint-every", "2"]);
    assert_eq!(run(&args).status.code(), Some(0));
    let reference = read_logs(&fedkan_cli::trial_log_path(&a, ModelKind::Mlp, 0)).unwrap();

    let mut args = run_args(mnist, b.to_str().unwrap(), "6");
    args.extend(["--checkpoint-every", "2"]);
    let mut child = fedkan().args(&args).spawn().unwrap();
    let log = fedkan_cli::trial_log_path(&b, ModelKind::Mlp, 0);
    let partial = log.with_extension("jsonl.partial");
    let deadline = Instant::now() + Duration::from_secs(300);
    loop {
        let lines = std::fs::read_to_string(&partial)
            .map(|s| s.lines().count())
            .unwrap_or(0);
        if lines >= 3 || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(
        !log.exists(),
        "trial finished before it could be interrupted"
    );
    assert!(log.with_extension("ckpt").exists());

    let o = run(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let resumed = read_logs(&log).unwrap();
    assert_eq!(resumed.without_timing(), reference.without_timing());
    assert!(!partial.exists());
}
