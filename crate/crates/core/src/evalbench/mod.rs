//! Datasets, splits and the cross-validated metric suite.

mod evaluate;
mod metrics;
mod split;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::train::{Standardizer, Targets, TrainError};

pub use evaluate::{
    evaluate_model, render_table, write_report, EvalReport, FoldFailure, MetricSummary,
};
pub use metrics::{
    argmax, classification_metrics, regression_metrics, ClassificationMetrics, RegressionMetrics,
    LOG_CLAMP,
};
pub use split::{split_folds, Split, SplitMode, SplitPlan};

const IRIS_CSV: &str = include_str!("../../data/iris.csv");

/// Samples per class in generated classification sets.
pub const SYNTHETIC_PER_CLASS: usize = 50;
/// Samples in generated regression sets.
pub const SYNTHETIC_REGRESSION_SIZE: usize = 200;
/// Radius of the circle carrying the class means.
pub const BLOB_RADIUS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown dataset kind `{0}`")]
    UnknownKind(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("row {row}, column {col}: `{value}` is not numeric")]
    NonNumericCell { row: usize, col: usize, value: String },
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("too few samples per stratum: {0}")]
    TooFewSamplesPerStratum(String),
    #[error("length mismatch: {expected} targets, {actual} predictions")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("row {row} is not a probability distribution")]
    InvalidDistribution { row: usize },
    #[error("model and dataset disagree on the task")]
    TaskMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("every fold failed; first error: {0}")]
    AllFoldsFailed(TrainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub x: Vec<Vec<f64>>,
    pub y: Targets,
    pub feature_names: Vec<String>,
}

impl Dataset {
    /// Checks shapes and that every class occurs.
    pub fn new(
        name: impl Into<String>,
        x: Vec<Vec<f64>>,
        y: Targets,
        feature_names: Vec<String>,
    ) -> Result<Self, EvalError> {
        if x.len() != y.len() {
            return Err(EvalError::LengthMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if x.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        if let Some(bad) = x.iter().find(|r| r.len() != feature_names.len()) {
            return Err(EvalError::InvalidArgument(format!(
                "row with {} values for {} features",
                bad.len(),
                feature_names.len()
            )));
        }
        if let Targets::Labels { labels, n_classes } = &y {
            let mut seen = vec![false; *n_classes];
            for &l in labels {
                match seen.get_mut(l) {
                    Some(s) => *s = true,
                    None => return Err(EvalError::InvalidLabels(format!("label {l} ≥ {n_classes}"))),
                }
            }
            if let Some(c) = seen.iter().position(|s| !s) {
                return Err(EvalError::InvalidLabels(format!("class {c} has no samples")));
            }
        }
        Ok(Self {
            name: name.into(),
            x,
            y,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn task(&self) -> Task {
        match &self.y {
            Targets::Real(_) => Task::Regression,
            Targets::Labels { n_classes, .. } => Task::Classification {
                n_classes: *n_classes,
            },
        }
    }
}

/// Built-in dataset recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Iris: sepal length, sepal width and petal length predicting petal
    /// width, all standardized.
    IrisRegression3f,
    /// Standard normal features, `y = w·x + 0.1·ε` with `w` drawn from the seed.
    SyntheticRegression { features: usize },
    /// Unit-covariance Gaussian blobs with means spaced on a circle of radius 3.
    SyntheticClassification { features: usize, classes: usize },
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetKind::IrisRegression3f => f.write_str("iris_regression_3f"),
            DatasetKind::SyntheticRegression { features } => {
                write!(f, "synthetic_regression({features})")
            }
            DatasetKind::SyntheticClassification { features, classes } => {
                write!(f, "synthetic_classification({features},{classes})")
            }
        }
    }
}

impl FromStr for DatasetKind {
    type Err = EvalError;

    /// Accepts `iris_regression_3f`, `synthetic_regression[(k)]`,
    /// `synthetic_classification[(k,C)]` and `synthetic_<k>f`.
    fn from_str(s: &str) -> Result<Self, EvalError> {
        let unknown = || EvalError::UnknownKind(s.to_string());
        let s = s.trim();
        let (head, args) = match s.split_once('(') {
            Some((h, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(unknown)?;
                let args = inner
                    .split(',')
                    .map(|a| a.trim().parse::<usize>().map_err(|_| unknown()))
                    .collect::<Result<Vec<_>, _>>()?;
                (h, args)
            }
            None => (s, Vec::new()),
        };
        let kind = match (head.to_ascii_lowercase().replace('-', "_").as_str(), args.as_slice()) {
            ("iris_regression_3f", []) => DatasetKind::IrisRegression3f,
            ("synthetic_regression", []) => DatasetKind::SyntheticRegression { features: 4 },
            ("synthetic_regression", [k]) => DatasetKind::SyntheticRegression { features: *k },
            ("synthetic_classification", []) => DatasetKind::SyntheticClassification {
                features: 2,
                classes: 3,
            },
            ("synthetic_classification", [k, c]) => DatasetKind::SyntheticClassification {
                features: *k,
                classes: *c,
            },
            (other, []) => {
                let k = other
                    .strip_prefix("synthetic_")
                    .and_then(|r| r.strip_suffix('f'))
                    .and_then(|r| r.parse().ok())
                    .ok_or_else(unknown)?;
                DatasetKind::SyntheticRegression { features: k }
            }
            _ => return Err(unknown()),
        };
        Ok(kind)
    }
}

/// Builds a dataset from a recipe. Generated sets are a pure function of
/// `(kind, seed)`.
pub fn make_dataset(kind: DatasetKind, seed: u64) -> Result<Dataset, EvalError> {
    match kind {
        DatasetKind::IrisRegression3f => {
            let table = parse_csv(IRIS_CSV, "iris.csv")?;
            let mut d = table.into_dataset("iris_regression_3f", "petal_width", None, &["species"])?;
            d.x = Standardizer::fit(&d.x).transform(&d.x);
            standardize_target(&mut d);
            Ok(d)
        }
        DatasetKind::SyntheticRegression { features } => {
            if features == 0 {
                return Err(EvalError::InvalidArgument("need at least one feature".into()));
            }
            let mut r = rng::seeded(seed);
            let w: Vec<f64> = (0..features).map(|_| r.sample(StandardNormal)).collect();
            let mut x = Vec::with_capacity(SYNTHETIC_REGRESSION_SIZE);
            let mut y = Vec::with_capacity(SYNTHETIC_REGRESSION_SIZE);
            for _ in 0..SYNTHETIC_REGRESSION_SIZE {
                let row: Vec<f64> = (0..features).map(|_| r.sample(StandardNormal)).collect();
                let noise: f64 = r.sample(StandardNormal);
                y.push(row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.1 * noise);
                x.push(row);
            }
            Dataset::new(kind.to_string(), x, Targets::Real(y), feature_names(features))
        }
        DatasetKind::SyntheticClassification { features, classes } => {
            if features == 0 || classes < 2 {
                return Err(EvalError::InvalidArgument(
                    "need at least one feature and two classes".into(),
                ));
            }
            let mut r = rng::seeded(seed);
            let mut x = Vec::with_capacity(SYNTHETIC_PER_CLASS * classes);
            let mut labels = Vec::with_capacity(SYNTHETIC_PER_CLASS * classes);
            for i in 0..SYNTHETIC_PER_CLASS * classes {
                let c = i % classes;
                let angle = std::f64::consts::TAU * c as f64 / classes as f64;
                let centre = [BLOB_RADIUS * angle.cos(), BLOB_RADIUS * angle.sin()];
                let row: Vec<f64> = (0..features)
                    .map(|j| centre.get(j).copied().unwrap_or(0.0) + r.sample::<f64, _>(StandardNormal))
                    .collect();
                x.push(row);
                labels.push(c);
            }
            Dataset::new(
                kind.to_string(),
                x,
                Targets::Labels {
                    labels,
                    n_classes: classes,
                },
                feature_names(features),
            )
        }
    }
}

fn feature_names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("x{j}")).collect()
}

fn standardize_target(d: &mut Dataset) {
    if let Targets::Real(y) = &mut d.y {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let std = if std > 0.0 { std } else { 1.0 };
        for v in y.iter_mut() {
            *v = (*v - mean) / std;
        }
    }
}

/// How to read the target column of a CSV table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvTask {
    Regression { standardize_target: bool },
    /// Integer labels `0..C`; `C` is one past the largest label.
    Classification,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_csv(text: &str, origin: &str) -> Result<Table, EvalError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let io = |e: csv::Error| EvalError::Io {
        path: origin.to_string(),
        message: e.to_string(),
    };
    let header: Vec<String> = reader.headers().map_err(io)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(io)?;
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| EvalError::NonNumericCell {
                        row: i + 1,
                        col: col + 1,
                        value: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

impl Table {
    fn into_dataset(
        self,
        name: &str,
        target: &str,
        classification: Option<()>,
        drop: &[&str],
    ) -> Result<Dataset, EvalError> {
        let t = self
            .header
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| EvalError::MissingColumn(target.to_string()))?;
        let keep: Vec<usize> = (0..self.header.len())
            .filter(|&j| j != t && !drop.contains(&self.header[j].as_str()))
            .collect();
        let x = self
            .rows
            .iter()
            .map(|r| keep.iter().map(|&j| r[j]).collect())
            .collect();
        let names = keep.iter().map(|&j| self.header[j].clone()).collect();
        let column: Vec<f64> = self.rows.iter().map(|r| r[t]).collect();
        let y = match classification {
            None => Targets::Real(column),
            Some(()) => {
                let labels = column
                    .iter()
                    .map(|&v| {
                        if v >= 0.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(EvalError::InvalidLabels(format!("{v} is not a class index")))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let n_classes = labels.iter().max().map_or(0, |m| m + 1);
                Targets::Labels { labels, n_classes }
            }
        };
        Dataset::new(name, x, y, names)
    }
}

/// Reads a headed numeric CSV. Every column except `target_column` becomes a
/// feature, in header order.
pub fn load_csv_dataset(path: &Path, target_column: &str, task: CsvTask) -> Result<Dataset, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let table = parse_csv(&text, &path.display().to_string())?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    match task {
        CsvTask::Regression { standardize_target: s } => {
            let mut d = table.into_dataset(&name, target_column, None, &[])?;
            if s {
                standardize_target(&mut d);
            }
            Ok(d)
        }
        CsvTask::Classification => table.into_dataset(&name, target_column, Some(()), &[]),
    }
}
