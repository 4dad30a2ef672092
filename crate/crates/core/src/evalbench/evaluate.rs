//! Cross-validated evaluation and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::mean_std;
use super::{
    classification_metrics, regression_metrics, split_folds, Dataset, EvalError, SplitMode, Task,
};
use crate::train::{Model, Predictions, Targets, TrainError};

/// One metric across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_fold: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
}

impl MetricSummary {
    fn from_values(per_fold: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&per_fold);
        Self { per_fold, mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub model: String,
    pub optimizer: String,
    pub config: serde_json::Value,
    pub task: Task,
    pub k: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub folds_completed: usize,
    pub failures: Vec<FoldFailure>,
    /// Keyed by metric name; values computed on each held-out fold.
    pub metrics: BTreeMap<String, MetricSummary>,
    /// Pooled residual moments over every held-out prediction.
    pub residual_mean: Option<f64>,
    pub residual_std: Option<f64>,
    pub n_residuals: usize,
    /// Confusion counts summed over folds, `[true][predicted]`.
    pub confusion: Option<Vec<Vec<usize>>>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.get(name)
    }
}

enum FoldOutcome {
    Regression {
        mse: f64,
        residual_mean: f64,
        residual_std: f64,
        residuals: Vec<f64>,
    },
    Classification(super::ClassificationMetrics),
}

fn run_fold<M: Model>(
    model: &M,
    dataset: &Dataset,
    train: &[usize],
    held_out: &[usize],
    seed: u64,
) -> Result<FoldOutcome, TrainError> {
    let rows = |idx: &[usize]| idx.iter().map(|&i| dataset.x[i].clone()).collect::<Vec<_>>();
    let fitted = model.fit(&rows(train), &dataset.y.select(train), seed)?;
    let predictions = model.predict(&fitted, &rows(held_out))?;
    let bad_length = |e: EvalError| TrainError::InvalidConfig(e.to_string());
    match (dataset.y.select(held_out), predictions) {
        (Targets::Real(y), Predictions::Real(y_hat)) => {
            let m = regression_metrics(&y, &y_hat).map_err(bad_length)?;
            Ok(FoldOutcome::Regression {
                mse: m.mse,
                residual_mean: m.residual_mean,
                residual_std: m.residual_std,
                residuals: m.residuals,
            })
        }
        (Targets::Labels { labels, n_classes }, Predictions::Probabilities(p)) => {
            let m = classification_metrics(&labels, &p, n_classes).map_err(bad_length)?;
            Ok(FoldOutcome::Classification(m))
        }
        _ => Err(TrainError::TaskMismatch),
    }
}

/// Runs stratified `k`-fold cross-validation with folds trained in parallel.
/// Fold `f` is fitted with seed `seed + f`. Failed folds are recorded and
/// excluded from the aggregates.
pub fn evaluate_model<M: Model>(
    model: &M,
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let task = dataset.task();
    if model.is_classifier() != matches!(task, Task::Classification { .. }) {
        return Err(EvalError::TaskMismatch);
    }
    let plan = split_folds(dataset, SplitMode::KFold { k }, seed)?;
    let outcomes: Vec<Result<FoldOutcome, TrainError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .splits
            .iter()
            .enumerate()
            .map(|(f, split)| {
                scope.spawn(move || {
                    run_fold(
                        model,
                        dataset,
                        &split.train,
                        &split.validation,
                        seed.wrapping_add(f as u64),
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold thread panicked"))
            .collect()
    });

    let mut failures = Vec::new();
    let mut first_error = None;
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut push = |name: &str, v: f64| values.entry(name.to_string()).or_default().push(v);
    let mut residuals = Vec::new();
    let mut confusion: Option<Vec<Vec<usize>>> = None;
    let mut completed = 0;
    for (fold, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Err(e) => {
                failures.push(FoldFailure {
                    fold,
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
            Ok(FoldOutcome::Regression {
                mse,
                residual_mean,
                residual_std,
                residuals: r,
            }) => {
                completed += 1;
                push("mse", mse);
                push("residual_mean", residual_mean);
                push("residual_std", residual_std);
                residuals.extend(r);
            }
            Ok(FoldOutcome::Classification(m)) => {
                completed += 1;
                push("accuracy", m.accuracy);
                push("f1_macro", m.f1_macro);
                push("f1_weighted", m.f1_weighted);
                push("log_loss", m.log_loss);
                push("brier", m.brier);
                if let Some(a) = m.auroc_macro {
                    push("auroc_macro", a);
                }
                match &mut confusion {
                    None => confusion = Some(m.confusion),
                    Some(acc) => {
                        for (row, add) in acc.iter_mut().zip(&m.confusion) {
                            for (a, b) in row.iter_mut().zip(add) {
                                *a += b;
                            }
                        }
                    }
                }
            }
        }
    }
    if completed == 0 {
        return Err(EvalError::AllFoldsFailed(
            first_error.expect("at least one fold ran"),
        ));
    }
    let (residual_mean, residual_std) = if residuals.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&residuals);
        (Some(m), Some(s))
    };
    Ok(EvalReport {
        dataset: dataset.name.clone(),
        model: model.name(),
        optimizer: model.optimizer_name().to_string(),
        config: model.config(),
        task,
        k,
        seed,
        n_samples: dataset.len(),
        folds_completed: completed,
        failures,
        metrics: values
            .into_iter()
            .map(|(k, v)| (k, MetricSummary::from_values(v)))
            .collect(),
        residual_mean,
        residual_std,
        n_residuals: residuals.len(),
        confusion,
    })
}

/// Plain-text summary table.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dataset: {}  samples: {}  folds: {}/{}  seed: {}",
        report.dataset, report.n_samples, report.folds_completed, report.k, report.seed
    );
    let get = |name: &str| report.metric(name).map_or((f64::NAN, f64::NAN), |m| (m.mean, m.std));
    match report.task {
        Task::Regression => {
            let (mse, mse_std) = get("mse");
            let header = ["Config", "Optimizer", "Avg MSE", "Std MSE", "Residual Mean", "Residual Std"];
            let row = [
                report.model.clone(),
                report.optimizer.clone(),
                format!("{mse:.4}"),
                format!("{mse_std:.4}"),
                format!("{:.4}", report.residual_mean.unwrap_or(f64::NAN)),
                format!("{:.4}", report.residual_std.unwrap_or(f64::NAN)),
            ];
            write_rows(&mut out, &header, &[row.to_vec()]);
        }
        Task::Classification { n_classes } => {
            let header = ["Config", "Optimizer", "Metric", "Mean", "Std"];
            let rows: Vec<Vec<String>> = [
                ("Accuracy", "accuracy"),
                ("F1 Macro", "f1_macro"),
                ("F1 Weighted", "f1_weighted"),
                ("AUROC Macro", "auroc_macro"),
                ("Log Loss", "log_loss"),
                ("Brier", "brier"),
            ]
            .iter()
            .map(|(label, key)| {
                let (m, s) = get(key);
                vec![
                    report.model.clone(),
                    report.optimizer.clone(),
                    label.to_string(),
                    format!("{m:.4}"),
                    format!("{s:.4}"),
                ]
            })
            .collect();
            write_rows(&mut out, &header, &rows);
            if let Some(c) = &report.confusion {
                let _ = writeln!(out, "\nconfusion (rows true, columns predicted)");
                let header: Vec<String> = std::iter::once(String::new())
                    .chain((0..n_classes).map(|j| format!("pred {j}")))
                    .collect();
                let rows: Vec<Vec<String>> = c
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        std::iter::once(format!("true {i}"))
                            .chain(r.iter().map(usize::to_string))
                            .collect()
                    })
                    .collect();
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                write_rows(&mut out, &header, &rows);
            }
        }
    }
    for f in &report.failures {
        let _ = writeln!(out, "fold {} failed: {}", f.fold, f.error);
    }
    out
}

fn write_rows(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            rows.iter()
                .map(|r| r[j].chars().count())
                .chain(std::iter::once(header[j].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let _ = writeln!(out, "{}", line(header.to_vec()).trim_end());
    let _ = writeln!(
        out,
        "{}",
        widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-")
    );
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()).trim_end());
    }
}

/// Writes `<stem>.json` and `<stem>.txt` into `dir`, where the stem names the
/// dataset, model family and seed.
pub fn write_report(report: &EvalReport, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let family = report
        .config
        .get("model")
        .and_then(|v| v.as_str())
        .unwrap_or("model");
    let dataset: String = report
        .dataset
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    let stem = format!("eval_{}_{}_seed{}", dataset.trim_matches('_'), family, report.seed);
    let json = dir.join(format!("{stem}.json"));
    let txt = dir.join(format!("{stem}.txt"));
    std::fs::write(&json, serde_json::to_string_pretty(report)? + "\n")?;
    std::fs::write(&txt, render_table(report))?;
    Ok((json, txt))
}
