//! Trial-level statistics: mean/dispersion summaries, one-sided Welch tests,
//! percentile-bootstrap intervals for ratios of means, and the report tables
//! built from them.

mod report;

pub use report::{
    curves_csv, report_tables, AccuracyRow, Report, ReportOptions, TimingRow, WelchRow,
};

use statrs::function::beta::checked_beta_reg;

use crate::error::{Error, Result};
use crate::numerics::{sequential_sum, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std_dev: f64,
    /// `std_dev / √n`.
    pub std_error: f64,
}

/// Two-pass mean and sample standard deviation.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = sequential_sum(values) / n as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let std_dev = (sequential_sum(&sq) / (n - 1) as f64).sqrt();
    Ok(Summary {
        n,
        mean,
        std_dev,
        std_error: std_dev / (n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub t_stat: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub dof: f64,
    /// P(T ≥ t) under H0, alternative mean(a) > mean(b).
    pub p_one_sided: f64,
}

/// Upper tail of Student's t with `dof` degrees of freedom, via
/// `P(T ≥ t) = I_{ν/(ν+t²)}(ν/2, 1/2) / 2` for t ≥ 0 and its complement below.
pub fn student_t_upper_tail(t: f64, dof: f64) -> Result<f64> {
    if t.is_nan() || !(dof > 0.0) {
        return Err(Error::Domain(format!(
            "t tail undefined for t={t}, dof={dof}"
        )));
    }
    let half = if t.is_infinite() {
        0.0
    } else {
        let x = dof / (dof + t * t);
        0.5 * checked_beta_reg(dof / 2.0, 0.5, x).map_err(|e| Error::Domain(e.to_string()))?
    };
    Ok(if t >= 0.0 { half } else { 1.0 - half })
}

/// One-sided Welch t-test of mean(a) > mean(b).
///
/// If both samples have zero variance the statistic is ±∞ (p = 0 or 1, dof
/// `na + nb − 2`) when the means differ, and the test is an error when they
/// are equal.
pub fn welch_one_sided(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let sa = summarize(a)?;
    let sb = summarize(b)?;
    let (na, nb) = (sa.n as f64, sb.n as f64);
    let va = sa.std_dev * sa.std_dev / na;
    let vb = sb.std_dev * sb.std_dev / nb;
    let se2 = va + vb;
    let diff = sa.mean - sb.mean;
    if se2 == 0.0 {
        if diff == 0.0 {
            return Err(Error::UndefinedTest(
                "both samples are constant with equal means".into(),
            ));
        }
        return Ok(TestResult {
            t_stat: diff.signum() * f64::INFINITY,
            dof: na + nb - 2.0,
            p_one_sided: if diff > 0.0 { 0.0 } else { 1.0 },
        });
    }
    let t = diff / se2.sqrt();
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TestResult {
        t_stat: t,
        dof,
        p_one_sided: student_t_upper_tail(t, dof)?,
    })
}

/// Type-7 (linear interpolation) quantile of ascending `sorted`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioInterval {
    /// mean(num) / mean(den) on the original samples.
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Percentile-bootstrap interval for `mean(num) / mean(den)`.
///
/// Each resample draws `num.len()` indices for `num`, then `den.len()`
/// indices for `den`, with replacement from `rng`.
pub fn bootstrap_ratio_ci(
    num: &[f64],
    den: &[f64],
    resamples: usize,
    conf: f64,
    rng: &mut RngStream,
) -> Result<RatioInterval> {
    if num.is_empty() || den.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            got: num.len().min(den.len()),
        });
    }
    if resamples == 0 || !(conf > 0.0 && conf < 1.0) {
        return Err(Error::config(format!(
            "bootstrap needs resamples > 0 and conf in (0, 1), got {resamples} and {conf}"
        )));
    }
    if let Some(d) = den.iter().find(|&&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::Domain(format!(
            "bootstrap denominator value {d} is not positive"
        )));
    }
    if let Some(v) = num.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "bootstrap numerator value {v} is not finite"
        )));
    }
    let mean = |v: &[f64]| sequential_sum(v) / v.len() as f64;
    let mut draw = vec![0.0; num.len().max(den.len())];
    let mut ratios = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in &mut draw[..num.len()] {
            *slot = num[rng.below(num.len())];
        }
        let m_num = mean(&draw[..num.len()]);
        for slot in &mut draw[..den.len()] {
            *slot = den[rng.below(den.len())];
        }
        ratios.push(m_num / mean(&draw[..den.len()]));
    }
    ratios.sort_by(f64::total_cmp);
    let alpha = (1.0 - conf) / 2.0;
    Ok(RatioInterval {
        point: mean(num) / mean(den),
        lo: quantile_sorted(&ratios, alpha),
        hi: quantile_sorted(&ratios, 1.0 - alpha),
    })
}
