//! Model training: derivative-free optimization, the hybrid quantum model and
//! a dense MLP baseline behind one fit/predict surface.

mod artifact;
mod cobyla;
mod mlp;
mod qml;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::QsimError;

pub use artifact::{load_artifact, save_artifact, ModelArtifact};
pub use cobyla::{minimize_derivative_free, CobylaConfig, OptimizeError, OptimizerResult};
pub use mlp::{
    fit_mlp, loss_and_gradient, predict_mlp, DenseLayer, FittedMlp, Head, MlpModel, MlpSpec,
    MlpTrainConfig, MlpWeights,
};
pub use qml::{
    fit_qml, predict_qml, regression_gradient, FittedQml, QmlFit, QmlModel, QmlModelSpec,
    QmlTask, Readout,
};

/// Supervised targets for one dataset or fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Real(Vec<f64>),
    Labels { labels: Vec<usize>, n_classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(y) => y.len(),
            Targets::Labels { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Real(y) => Targets::Real(indices.iter().map(|&i| y[i]).collect()),
            Targets::Labels { labels, n_classes } => Targets::Labels {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictions {
    Real(Vec<f64>),
    Probabilities(Vec<Vec<f64>>),
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Real(v) => v.len(),
            Predictions::Probabilities(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("model task does not match the targets")]
    TaskMismatch,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training set")]
    EmptyData,
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

/// Anything the evaluation bench can cross-validate.
pub trait Model: Sync {
    type Fitted: Send;

    fn name(&self) -> String;

    /// Optimizer label for report tables.
    fn optimizer_name(&self) -> &'static str;

    /// Configuration echo stored with reports.
    fn config(&self) -> serde_json::Value;

    fn is_classifier(&self) -> bool;

    fn fit(&self, x: &[Vec<f64>], y: &Targets, seed: u64) -> Result<Self::Fitted, TrainError>;

    fn predict(&self, fitted: &Self::Fitted, x: &[Vec<f64>]) -> Result<Predictions, TrainError>;
}

/// Per-column z-scoring fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population moments; constant columns keep unit scale.
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn check_rows(x: &[Vec<f64>], d: usize) -> Result<(), TrainError> {
    for row in x {
        if row.len() != d {
            return Err(TrainError::DimensionMismatch {
                expected: d,
                actual: row.len(),
            });
        }
    }
    Ok(())
}
