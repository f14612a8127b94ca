//! JSONL trial log: one [`RoundLine`] per round followed by a single
//! [`LogFooter`]. A log without footer is an incomplete trial.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RoundRecord, TrialSummary};
use crate::error::{Error, Result};
use crate::models::ModelKind;

/// JSON has no NaN/inf; non-finite values are written as strings.
mod real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("invalid number `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundLine {
    pub trial_id: String,
    pub model: ModelKind,
    pub round: usize,
    #[serde(with = "real")]
    pub test_acc: f64,
    #[serde(with = "real")]
    pub test_loss: f64,
    #[serde(with = "real")]
    pub train_acc: f64,
    #[serde(with = "real")]
    pub train_loss: f64,
    pub sampled_clients: Vec<usize>,
    #[serde(with = "real")]
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogFooter {
    pub trial_id: String,
    pub model: ModelKind,
    pub seed: u64,
    pub n_rounds: usize,
    #[serde(with = "real")]
    pub total_time_s: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Round(RoundLine),
    Footer(LogFooter),
}

fn encode(trial: &TrialSummary) -> String {
    let mut out = String::new();
    for r in &trial.records {
        let line = RoundLine {
            trial_id: trial.trial_id.clone(),
            model: trial.model,
            round: r.round,
            test_acc: r.test_acc,
            test_loss: r.test_loss,
            train_acc: r.train_acc,
            train_loss: r.train_loss,
            sampled_clients: r.sampled_clients.clone(),
            elapsed_s: r.elapsed_s,
        };
        out.push_str(&serde_json::to_string(&line).expect("serializable"));
        out.push('\n');
    }
    let footer = LogFooter {
        trial_id: trial.trial_id.clone(),
        model: trial.model,
        seed: trial.seed,
        n_rounds: trial.records.len(),
        total_time_s: trial.total_time_s,
    };
    out.push_str(&serde_json::to_string(&footer).expect("serializable"));
    out.push('\n');
    out
}

/// Writes the log atomically (temp file + rename).
pub fn write_logs(trial: &TrialSummary, path: &Path) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(encode(trial).as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_logs(path: &Path) -> Result<TrialSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut records: Vec<RoundRecord> = Vec::new();
    let mut header: Option<(String, ModelKind)> = None;
    let mut footer = None;
    let mut last_line = 0;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        last_line = line_no;
        if raw.trim().is_empty() {
            continue;
        }
        if footer.is_some() {
            return Err(err(line_no, "content after trial footer".into()));
        }
        let parsed: Line = serde_json::from_str(raw).map_err(|e| err(line_no, e.to_string()))?;
        match parsed {
            Line::Round(r) => {
                match &header {
                    None => header = Some((r.trial_id.clone(), r.model)),
                    Some((id, model)) if *id != r.trial_id || *model != r.model => {
                        return Err(err(line_no, "trial id/model changes mid-log".into()))
                    }
                    Some(_) => {}
                }
                if r.round != records.len() + 1 {
                    return Err(err(
                        line_no,
                        format!("expected round {}, found {}", records.len() + 1, r.round),
                    ));
                }
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
            Line::Footer(f) => {
                if f.n_rounds != records.len() {
                    return Err(err(
                        line_no,
                        format!(
                            "footer claims {} rounds, log has {}",
                            f.n_rounds,
                            records.len()
                        ),
                    ));
                }
                if let Some((id, model)) = &header {
                    if *id != f.trial_id || *model != f.model {
                        return Err(err(line_no, "footer does not match round lines".into()));
                    }
                }
                footer = Some(f);
            }
        }
    }
    let footer = footer.ok_or_else(|| {
        err(
            last_line + 1,
            "missing trial footer (incomplete log)".into(),
        )
    })?;
    Ok(TrialSummary {
        trial_id: footer.trial_id,
        model: footer.model,
        seed: footer.seed,
        records,
        total_time_s: footer.total_time_s,
    })
}

fn collect_jsonl(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_jsonl(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "jsonl") {
            out.push(path);
        }
    }
    Ok(())
}

/// Reads every `*.jsonl` below `dir` and groups the trials by model kind,
/// ordered by trial id within each group.
pub fn scan_logs(dir: &Path) -> Result<BTreeMap<ModelKind, Vec<TrialSummary>>> {
    let mut paths = Vec::new();
    collect_jsonl(dir, &mut paths)?;
    paths.sort();
    let mut groups: BTreeMap<ModelKind, Vec<TrialSummary>> = BTreeMap::new();
    for p in paths {
        let t = read_logs(&p)?;
        groups.entry(t.model).or_default().push(t);
    }
    for v in groups.values_mut() {
        v.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_trial(model: ModelKind, id: &str, rounds: usize) -> TrialSummary {
        TrialSummary {
            trial_id: id.into(),
            model,
            seed: 12345678901234,
            records: (1..=rounds)
                .map(|r| RoundRecord {
                    round: r,
                    test_acc: 0.1 + r as f64 / 300.0,
                    test_loss: 2.3 / r as f64,
                    train_acc: 1.0 / 3.0,
                    train_loss: std::f64::consts::PI,
                    sampled_clients: vec![r, r + 10],
                    elapsed_s: 0.123456789,
                })
                .collect(),
            total_time_s: 98.7654321,
        }
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        let t = sample_trial(ModelKind::SplineKan, "spline_kan-000", 5);
        write_logs(&t, &p).unwrap();
        assert_eq!(read_logs(&p).unwrap(), t);
    }

    #[test]
    fn non_finite_values_survive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        let mut t = sample_trial(ModelKind::Mlp, "mlp-000", 2);
        t.records[1].test_loss = f64::NAN;
        t.records[1].train_loss = f64::INFINITY;
        write_logs(&t, &p).unwrap();
        let back = read_logs(&p).unwrap();
        assert!(back.records[1].test_loss.is_nan());
        assert_eq!(back.records[1].train_loss, f64::INFINITY);
    }

    #[test]
    fn truncated_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        let t = sample_trial(ModelKind::Mlp, "mlp-000", 4);
        write_logs(&t, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        // Cut in the middle of line 3.
        let cut: usize = text.lines().take(2).map(|l| l.len() + 1).sum::<usize>() + 20;
        std::fs::write(&p, &text[..cut]).unwrap();
        match read_logs(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        // Whole lines but no footer.
        let cut: usize = text.lines().take(4).map(|l| l.len() + 1).sum();
        std::fs::write(&p, &text[..cut]).unwrap();
        match read_logs(&p) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("footer"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scan_groups_by_model() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [ModelKind::Mlp, ModelKind::SplineKan, ModelKind::RbfKan] {
            let sub = dir.path().join(kind.as_str());
            std::fs::create_dir_all(&sub).unwrap();
            for k in 0..15 {
                let id = format!("{kind}-{k:03}");
                write_logs(
                    &sample_trial(kind, &id, 3),
                    &sub.join(format!("{id}.jsonl")),
                )
                .unwrap();
            }
        }
        let groups = scan_logs(dir.path()).unwrap();
        assert_eq!(groups.len(), 3);
        for (kind, trials) in &groups {
            assert_eq!(trials.len(), 15);
            assert!(trials.iter().all(|t| t.model == *kind));
        }
    }
}
