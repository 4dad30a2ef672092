//! Regression and classification metrics.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Probabilities are clamped to this floor inside the log loss.
pub const LOG_CLAMP: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub residual_mean: f64,
    /// Population standard deviation of the residuals.
    pub residual_std: f64,
    /// `y - ŷ`, in row order.
    pub residuals: Vec<f64>,
}

pub fn regression_metrics(y: &[f64], y_hat: &[f64]) -> Result<RegressionMetrics, EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::LengthMismatch {
            expected: y.len(),
            actual: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = y.len() as f64;
    let residuals: Vec<f64> = y.iter().zip(y_hat).map(|(a, b)| a - b).collect();
    let mse = residuals.iter().map(|r| r * r).sum::<f64>() / n;
    let (residual_mean, residual_std) = mean_std(&residuals);
    Ok(RegressionMetrics {
        mse,
        residual_mean,
        residual_std,
        residuals,
    })
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub per_class_f1: Vec<f64>,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// One-vs-rest ROC AUC averaged over classes with both positives and
    /// negatives present; `None` when no class qualifies.
    pub auroc_macro: Option<f64>,
    pub log_loss: f64,
    /// Mean squared distance between probability vectors and one-hot truth.
    pub brier: f64,
}

/// Index of the largest probability; ties go to the lowest class.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = c;
        }
    }
    best
}

pub fn classification_metrics(
    y: &[usize],
    proba: &[Vec<f64>],
    n_classes: usize,
) -> Result<ClassificationMetrics, EvalError> {
    if y.len() != proba.len() {
        return Err(EvalError::LengthMismatch {
            expected: y.len(),
            actual: proba.len(),
        });
    }
    if y.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    for (row, (p, &label)) in proba.iter().zip(y).enumerate() {
        let valid = p.len() == n_classes
            && label < n_classes
            && p.iter().all(|v| v.is_finite() && *v >= -SUM_TOLERANCE)
            && (p.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE;
        if !valid {
            return Err(EvalError::InvalidDistribution { row });
        }
    }
    let n = y.len() as f64;
    let predicted: Vec<usize> = proba.iter().map(|p| argmax(p)).collect();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y.iter().zip(&predicted) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let per_class_f1: Vec<f64> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let fp = (0..n_classes).map(|t| confusion[t][c]).sum::<usize>() as f64 - tp;
            let fn_ = support[c] as f64 - tp;
            let denom = 2.0 * tp + fp + fn_;
            if denom > 0.0 {
                2.0 * tp / denom
            } else {
                0.0
            }
        })
        .collect();
    let f1_macro = per_class_f1.iter().sum::<f64>() / n_classes as f64;
    let f1_weighted = per_class_f1
        .iter()
        .zip(&support)
        .map(|(f, &s)| f * s as f64)
        .sum::<f64>()
        / n;

    let aucs: Vec<f64> = (0..n_classes)
        .filter_map(|c| {
            let scores: Vec<f64> = proba.iter().map(|p| p[c]).collect();
            let positive: Vec<bool> = y.iter().map(|&t| t == c).collect();
            binary_auc(&scores, &positive)
        })
        .collect();
    let auroc_macro = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);

    let log_loss = -proba
        .iter()
        .zip(y)
        .map(|(p, &t)| p[t].clamp(LOG_CLAMP, 1.0).ln())
        .sum::<f64>()
        / n;
    let brier = proba
        .iter()
        .zip(y)
        .map(|(p, &t)| {
            p.iter()
                .enumerate()
                .map(|(c, &v)| (v - if c == t { 1.0 } else { 0.0 }).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n;

    Ok(ClassificationMetrics {
        accuracy: correct as f64 / n,
        per_class_f1,
        f1_macro,
        f1_weighted,
        confusion,
        auroc_macro,
        log_loss,
        brier,
    })
}

/// Mann-Whitney form of the ROC AUC with average ranks for ties.
fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}
