//! Report tables over groups of trials: per-round accuracy summaries, KAN
//! versus baseline Welch tests, and execution-time ratios.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{
    bootstrap_ratio_ci, summarize, welch_one_sided, Summary, TestResult, DEFAULT_RESAMPLES,
};
use crate::error::{Error, Result};
use crate::metrics::TrialSummary;
use crate::models::ModelKind;
use crate::numerics::RngStream;

pub type TrialGroups = BTreeMap<ModelKind, Vec<TrialSummary>>;

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Rounds to tabulate; `None` means every tenth round present in all trials.
    pub rounds: Option<Vec<usize>>,
    /// Groups that must be present. The baseline is always required.
    pub models: Vec<ModelKind>,
    pub baseline: ModelKind,
    pub resamples: usize,
    pub conf: f64,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            rounds: None,
            models: ModelKind::ALL.to_vec(),
            baseline: ModelKind::Mlp,
            resamples: DEFAULT_RESAMPLES,
            conf: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub model: ModelKind,
    pub round: usize,
    pub test_acc: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelchRow {
    pub model: ModelKind,
    pub round: usize,
    /// mean(model) − mean(baseline) test accuracy.
    pub mean_diff: f64,
    pub test: TestResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub model: ModelKind,
    pub time: Summary,
    /// mean(model time) / mean(baseline time); exactly 1 for the baseline.
    pub ratio: f64,
    /// Bootstrap interval, absent for the baseline row.
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub baseline: ModelKind,
    pub models: Vec<ModelKind>,
    pub rounds: Vec<usize>,
    pub conf: f64,
    pub accuracy: Vec<AccuracyRow>,
    pub welch: Vec<WelchRow>,
    pub timing: Vec<TimingRow>,
}

fn common_rounds(groups: &TrialGroups, models: &[ModelKind]) -> usize {
    models
        .iter()
        .flat_map(|m| groups[m].iter())
        .map(|t| t.records.len())
        .min()
        .unwrap_or(0)
}

fn accuracies(trials: &[TrialSummary], round: usize) -> Result<Vec<f64>> {
    trials
        .iter()
        .map(|t| {
            t.record(round)
                .map(|r| r.test_acc)
                .ok_or_else(|| Error::Report(format!("trial {} has no round {round}", t.trial_id)))
        })
        .collect()
}

pub fn report_tables(groups: &TrialGroups, opts: &ReportOptions) -> Result<Report> {
    let mut models: Vec<ModelKind> = ModelKind::ALL
        .into_iter()
        .filter(|m| opts.models.contains(m) || *m == opts.baseline)
        .collect();
    for m in &models {
        if groups.get(m).is_none_or(|v| v.is_empty()) {
            return Err(Error::Report(format!("no trials found for model {m}")));
        }
    }
    models.sort_by_key(|m| {
        (
            *m == opts.baseline,
            ModelKind::ALL.iter().position(|k| k == m),
        )
    });
    let max_round = common_rounds(groups, &models);
    let rounds = match &opts.rounds {
        Some(r) => r.clone(),
        None if max_round >= 10 => (10..=max_round).step_by(10).collect(),
        None => vec![max_round],
    };
    if rounds.is_empty() || rounds.contains(&0) {
        return Err(Error::Report("no rounds to report".into()));
    }

    let mut accuracy = Vec::new();
    for m in &models {
        for &round in &rounds {
            accuracy.push(AccuracyRow {
                model: *m,
                round,
                test_acc: summarize(&accuracies(&groups[m], round)?)?,
            });
        }
    }
    let mean_of = |m: ModelKind, round: usize| {
        accuracy
            .iter()
            .find(|r| r.model == m && r.round == round)
            .map(|r| r.test_acc.mean)
            .expect("the accuracy table covers every model and round")
    };

    let mut welch = Vec::new();
    for m in models.iter().filter(|m| **m != opts.baseline) {
        for &round in &rounds {
            let a = accuracies(&groups[m], round)?;
            let b = accuracies(&groups[&opts.baseline], round)?;
            welch.push(WelchRow {
                model: *m,
                round,
                mean_diff: mean_of(*m, round) - mean_of(opts.baseline, round),
                test: welch_one_sided(&a, &b)?,
            });
        }
    }

    let times = |m: ModelKind| {
        groups[&m]
            .iter()
            .map(|t| t.total_time_s)
            .collect::<Vec<_>>()
    };
    let base_times = times(opts.baseline);
    let root = RngStream::new(opts.seed);
    let mut timing = Vec::new();
    for m in &models {
        let t = times(*m);
        let time = summarize(&t)?;
        let (ratio, ci) = if *m == opts.baseline {
            (1.0, None)
        } else {
            let mut rng = root.substream(&format!("bootstrap/{m}"));
            let iv = bootstrap_ratio_ci(&t, &base_times, opts.resamples, opts.conf, &mut rng)?;
            (iv.point, Some((iv.lo, iv.hi)))
        };
        timing.push(TimingRow {
            model: *m,
            time,
            ratio,
            ci,
        });
    }

    Ok(Report {
        baseline: opts.baseline,
        models,
        rounds,
        conf: opts.conf,
        accuracy,
        welch,
        timing,
    })
}

impl Report {
    fn accuracy_cell(&self, m: ModelKind, round: usize) -> &Summary {
        &self
            .accuracy
            .iter()
            .find(|r| r.model == m && r.round == round)
            .expect("complete table")
            .test_acc
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let n = |m: ModelKind| {
            self.timing
                .iter()
                .find(|r| r.model == m)
                .map_or(0, |r| r.time.n)
        };

        writeln!(
            s,
            "Test accuracy over communication rounds (mean / std dev / std error)"
        )
        .unwrap();
        write!(s, "{:>6}", "Round").unwrap();
        for m in &self.models {
            write!(s, "  {:>28}", format!("{} (n={})", m.label(), n(*m))).unwrap();
        }
        s.push('\n');
        for &round in &self.rounds {
            write!(s, "{round:>6}").unwrap();
            for m in &self.models {
                let c = self.accuracy_cell(*m, round);
                write!(
                    s,
                    "  {:>8.4} {:>9.4} {:>9.4}",
                    c.mean, c.std_dev, c.std_error
                )
                .unwrap();
            }
            s.push('\n');
        }

        let kans: Vec<ModelKind> = self
            .models
            .iter()
            .copied()
            .filter(|m| *m != self.baseline)
            .collect();
        writeln!(
            s,
            "\nMean accuracy difference vs {} and one-sided Welch p-value",
            self.baseline.label()
        )
        .unwrap();
        write!(s, "{:>6}", "Round").unwrap();
        for m in &kans {
            write!(
                s,
                "  {:>23}",
                format!("{} - {}", m.label(), self.baseline.label())
            )
            .unwrap();
        }
        s.push('\n');
        for &round in &self.rounds {
            write!(s, "{round:>6}").unwrap();
            for m in &kans {
                let r = self
                    .welch
                    .iter()
                    .find(|r| r.model == *m && r.round == round)
                    .expect("complete table");
                write!(s, "  {:>+10.4} {:>12.4e}", r.mean_diff, r.test.p_one_sided).unwrap();
            }
            s.push('\n');
        }

        writeln!(s, "\nExecution time per trial (seconds)").unwrap();
        writeln!(
            s,
            "{:<12} {:>4} {:>12} {:>12} {:>8}  {:.0}% CI",
            "Model",
            "n",
            "mean",
            "std dev",
            "ratio",
            self.conf * 100.0
        )
        .unwrap();
        for r in &self.timing {
            let ci = match r.ci {
                Some((lo, hi)) => format!("[{lo:.2}x, {hi:.2}x]"),
                None => "baseline".into(),
            };
            writeln!(
                s,
                "{:<12} {:>4} {:>12.2} {:>12.2} {:>7.2}x  {ci}",
                r.model.label(),
                r.time.n,
                r.time.mean,
                r.time.std_dev,
                r.ratio
            )
            .unwrap();
        }
        s
    }

    pub fn accuracy_csv(&self) -> String {
        let mut s = String::from("model,round,n,mean,std_dev,std_error\n");
        for r in &self.accuracy {
            let c = &r.test_acc;
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.model, r.round, c.n, c.mean, c.std_dev, c.std_error
            )
            .unwrap();
        }
        s
    }

    pub fn welch_csv(&self) -> String {
        let mut s = String::from("model,baseline,round,mean_diff,t_stat,dof,p_one_sided\n");
        for r in &self.welch {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.model,
                self.baseline,
                r.round,
                r.mean_diff,
                r.test.t_stat,
                r.test.dof,
                r.test.p_one_sided
            )
            .unwrap();
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("model,n,mean_s,std_dev_s,ratio,ci_lo,ci_hi\n");
        for r in &self.timing {
            let (lo, hi) = r.ci.map_or((String::new(), String::new()), |(l, h)| {
                (l.to_string(), h.to_string())
            });
            writeln!(
                s,
                "{},{},{},{},{},{lo},{hi}",
                r.model, r.time.n, r.time.mean, r.time.std_dev, r.ratio
            )
            .unwrap();
        }
        s
    }
}

/// Per-round mean and dispersion of every logged metric, for plotting curves.
pub fn curves_csv(groups: &TrialGroups) -> Result<String> {
    let mut s = String::from("model,round,metric,n,mean,std_dev,std_error\n");
    for (m, trials) in groups {
        let rounds = trials.iter().map(|t| t.records.len()).min().unwrap_or(0);
        for round in 1..=rounds {
            let pick = |f: fn(&crate::metrics::RoundRecord) -> f64| -> Vec<f64> {
                trials.iter().map(|t| f(&t.records[round - 1])).collect()
            };
            for (name, values) in [
                ("test_acc", pick(|r| r.test_acc)),
                ("test_loss", pick(|r| r.test_loss)),
                ("train_acc", pick(|r| r.train_acc)),
                ("train_loss", pick(|r| r.train_loss)),
            ] {
                let c = summarize(&values)?;
                writeln!(
                    s,
                    "{m},{round},{name},{},{},{},{}",
                    c.n, c.mean, c.std_dev, c.std_error
                )
                .unwrap();
            }
        }
    }
    Ok(s)
}
