use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Mean negative log-likelihood over the batch.
    pub loss: f64,
    /// `(softmax − onehot) / batch_size`.
    pub grad: Matrix,
    /// Number of rows whose argmax (lowest index on ties) equals the label.
    pub correct: usize,
}

fn check_label(label: u8, classes: usize, row: usize) -> Result<usize> {
    let l = label as usize;
    if l >= classes {
        return Err(Error::data(format!(
            "label {label} at row {row} out of range for {classes} classes"
        )));
    }
    Ok(l)
}

/// Index of the largest value; ties go to the lowest index. NaN never wins.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Stable `log Σ exp(row)`, returning it together with the max used for shifting.
fn log_sum_exp(row: &[f64]) -> (f64, f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
    (max + sum.ln(), max)
}

/// Per-row cross-entropy and correctness without the gradient, used by
/// evaluation so batched and unbatched sums agree exactly.
pub fn softmax_cross_entropy_rows(logits: &Matrix, labels: &[u8]) -> Result<Vec<(f64, bool)>> {
    if labels.len() != logits.rows() {
        return Err(Error::config(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    let classes = logits.cols();
    labels
        .iter()
        .enumerate()
        .map(|(r, &label)| {
            let l = check_label(label, classes, r)?;
            let row = logits.row(r);
            let (lse, _) = log_sum_exp(row);
            Ok((lse - row[l], argmax(row) == l))
        })
        .collect()
}

pub fn softmax_cross_entropy(logits: &Matrix, labels: &[u8]) -> Result<LossOutput> {
    if labels.len() != logits.rows() || labels.is_empty() {
        return Err(Error::config(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    let (n, classes) = logits.shape();
    let inv_n = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, classes);
    let mut total = 0.0;
    let mut correct = 0;
    for (r, &label) in labels.iter().enumerate() {
        let l = check_label(label, classes, r)?;
        let row = logits.row(r);
        let (lse, _) = log_sum_exp(row);
        total += lse - row[l];
        if argmax(row) == l {
            correct += 1;
        }
        let g = grad.row_mut(r);
        for (c, gv) in g.iter_mut().enumerate() {
            let p = (row[c] - lse).exp();
            *gv = (p - if c == l { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    Ok(LossOutput {
        loss: total * inv_n,
        grad,
        correct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn uniform_logits_give_ln_classes() {
        let logits = Matrix::zeros(3, 10);
        let out = softmax_cross_entropy(&logits, &[0, 4, 9]).unwrap();
        assert!((out.loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_logit_has_vanishing_loss() {
        let mut logits = Matrix::zeros(1, 10);
        logits.set(0, 3, 1000.0);
        let out = softmax_cross_entropy(&logits, &[3]).unwrap();
        assert!(out.loss < 1e-12);
        assert_eq!(out.correct, 1);
    }

    #[test]
    fn out_of_range_label_is_data_error() {
        let logits = Matrix::zeros(1, 10);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[10]),
            Err(Error::Data { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = RngStream::new(21);
        let data = (0..4 * 10).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
        let logits = Matrix::from_vec(4, 10, data).unwrap();
        let labels = [1u8, 7, 0, 9];
        let out = softmax_cross_entropy(&logits, &labels).unwrap();
        let h = 1e-5;
        for i in 0..logits.as_slice().len() {
            let mut plus = logits.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = logits.clone();
            minus.as_mut_slice()[i] -= h;
            let fd = (softmax_cross_entropy(&plus, &labels).unwrap().loss
                - softmax_cross_entropy(&minus, &labels).unwrap().loss)
                / (2.0 * h);
            assert!((fd - out.grad.as_slice()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn argmax_ties_pick_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0; 10]), 0);
    }

    #[test]
    fn rows_agree_with_batched_mean() {
        let mut rng = RngStream::new(4);
        let data = (0..6 * 10).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let logits = Matrix::from_vec(6, 10, data).unwrap();
        let labels = [0u8, 1, 2, 3, 4, 5];
        let rows = softmax_cross_entropy_rows(&logits, &labels).unwrap();
        let mean = rows.iter().map(|r| r.0).sum::<f64>() / 6.0;
        let out = softmax_cross_entropy(&logits, &labels).unwrap();
        assert!((mean - out.loss).abs() < 1e-14);
        assert_eq!(rows.iter().filter(|r| r.1).count(), out.correct);
    }
}
