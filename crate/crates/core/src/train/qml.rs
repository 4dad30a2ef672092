use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cobyla::{minimize_derivative_free, CobylaConfig, OptimizerResult};
use super::{check_rows, Model, Predictions, Standardizer, Targets, TrainError};
use crate::qsim::{
    build_real_amplitudes, build_zz_feature_map, expectation, parameter_shift_gradient,
    probability_aggregate, simulate, Circuit, ClassMap, EntanglementGraph, EntanglementScheme,
    FeatureMapOptions, Observable, QsimError, RealAmplitudesOptions, StateVector,
};
use crate::rng;

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QmlTask {
    Regression,
    Classification { n_classes: usize },
}

/// Scalar readout used for regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    MeanZ,
    ZOn(usize),
}

impl Readout {
    fn observable(self) -> Observable {
        match self {
            Readout::MeanZ => Observable::MeanZ,
            Readout::ZOn(q) => Observable::ZOn(q),
        }
    }
}

/// ZZ feature map followed by a RealAmplitudes ansatz.
///
/// Regression predicts `scale · ⟨readout⟩ + offset`, with the affine pair
/// appended to the ansatz parameters. Classification reads class
/// probabilities as basis-state masses grouped by index modulo `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmlModelSpec {
    pub n_qubits: usize,
    pub feature_reps: usize,
    pub ansatz_reps: usize,
    pub entanglement: EntanglementScheme,
    pub task: QmlTask,
    pub readout: Readout,
    pub alpha: f64,
    pub final_rotation_layer: bool,
}

impl QmlModelSpec {
    /// Full entanglement, `alpha = 2`, mean-Z readout, closing rotation layer.
    pub fn new(n_qubits: usize, reps: usize, task: QmlTask) -> Self {
        Self {
            n_qubits,
            feature_reps: reps,
            ansatz_reps: reps,
            entanglement: EntanglementScheme::Full,
            task,
            readout: Readout::MeanZ,
            alpha: 2.0,
            final_rotation_layer: true,
        }
    }

    pub fn ansatz_parameter_count(&self) -> usize {
        let layers = self.ansatz_reps + usize::from(self.final_rotation_layer);
        self.n_qubits * layers
    }

    pub fn parameter_count(&self) -> usize {
        self.ansatz_parameter_count()
            + match self.task {
                QmlTask::Regression => 2,
                QmlTask::Classification { .. } => 0,
            }
    }

    fn graph(&self) -> Result<EntanglementGraph, QsimError> {
        EntanglementGraph::new(self.entanglement, self.n_qubits)
    }

    fn ansatz(&self) -> Result<Circuit, QsimError> {
        if self.ansatz_reps == 0 {
            return Err(QsimError::ZeroReps);
        }
        build_real_amplitudes(
            self.n_qubits,
            self.ansatz_reps,
            &self.graph()?,
            &RealAmplitudesOptions {
                final_rotation_layer: self.final_rotation_layer,
            },
        )
    }

    fn feature_states(&self, x: &[Vec<f64>]) -> Result<Vec<StateVector>, TrainError> {
        check_rows(x, self.n_qubits)?;
        let graph = self.graph()?;
        let options = FeatureMapOptions {
            alpha: self.alpha,
            ..FeatureMapOptions::default()
        };
        x.iter()
            .map(|row| {
                let fm = build_zz_feature_map(row, self.feature_reps, &graph, &options)?;
                Ok(simulate(&fm, None)?)
            })
            .collect()
    }
}

struct Prepared {
    spec: QmlModelSpec,
    ansatz: Circuit,
    states: Vec<StateVector>,
}

enum Output {
    Scalar(Vec<f64>),
    Distribution(Vec<Vec<f64>>),
}

impl Prepared {
    fn new(spec: &QmlModelSpec, x: &[Vec<f64>]) -> Result<Self, TrainError> {
        Ok(Self {
            spec: *spec,
            ansatz: spec.ansatz()?,
            states: spec.feature_states(x)?,
        })
    }

    fn outputs(&self, params: &[f64]) -> Result<Output, TrainError> {
        let expected = self.spec.parameter_count();
        if params.len() != expected {
            return Err(TrainError::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        let (theta, affine) = params.split_at(self.spec.ansatz_parameter_count());
        let bound = self.ansatz.bind_slice(theta)?;
        match self.spec.task {
            QmlTask::Regression => {
                let observable = self.spec.readout.observable();
                let (scale, offset) = (affine[0], affine[1]);
                let values = self
                    .states
                    .iter()
                    .map(|s| Ok(scale * expectation(&simulate(&bound, Some(s))?, &observable)? + offset))
                    .collect::<Result<_, QsimError>>()?;
                Ok(Output::Scalar(values))
            }
            QmlTask::Classification { n_classes } => {
                let map = ClassMap::Modulo(n_classes);
                let rows = self
                    .states
                    .iter()
                    .map(|s| probability_aggregate(&simulate(&bound, Some(s))?, &map))
                    .collect::<Result<_, QsimError>>()?;
                Ok(Output::Distribution(rows))
            }
        }
    }

    fn loss(&self, params: &[f64], y: &Targets) -> Result<f64, TrainError> {
        let n = y.len() as f64;
        match (self.outputs(params)?, y) {
            (Output::Scalar(pred), Targets::Real(y)) => {
                Ok(pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n)
            }
            (Output::Distribution(rows), Targets::Labels { labels, .. }) => Ok(rows
                .iter()
                .zip(labels)
                .map(|(row, &c)| -row[c].max(PROB_FLOOR).ln())
                .sum::<f64>()
                / n),
            _ => Err(TrainError::TaskMismatch),
        }
    }
}

fn check_targets(spec: &QmlModelSpec, y: &Targets) -> Result<(), TrainError> {
    match (spec.task, y) {
        (QmlTask::Regression, Targets::Real(_)) => Ok(()),
        (QmlTask::Classification { n_classes }, Targets::Labels { labels, .. }) => {
            if let Some(&bad) = labels.iter().find(|&&c| c >= n_classes) {
                return Err(TrainError::DimensionMismatch {
                    expected: n_classes,
                    actual: bad + 1,
                });
            }
            Ok(())
        }
        _ => Err(TrainError::TaskMismatch),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QmlFit {
    pub parameters: Vec<f64>,
    pub optimizer: OptimizerResult,
}

/// Fits the circuit parameters by minimizing MSE (regression) or mean
/// cross-entropy (classification) with COBYLA. Ansatz angles start uniform
/// in `[−π, π]`; the regression affine pair starts at `(1, 0)`.
pub fn fit_qml(
    spec: &QmlModelSpec,
    x: &[Vec<f64>],
    y: &Targets,
    optimizer: &CobylaConfig,
    seed: u64,
) -> Result<QmlFit, TrainError> {
    if x.is_empty() {
        return Err(TrainError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(TrainError::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    check_targets(spec, y)?;
    let prepared = Prepared::new(spec, x)?;

    let mut rng = rng::seeded(seed);
    let mut x0: Vec<f64> = (0..spec.ansatz_parameter_count())
        .map(|_| rng.random_range(-PI..=PI))
        .collect();
    if spec.task == QmlTask::Regression {
        x0.extend([1.0, 0.0]);
    }

    let mut failure = None;
    let result = minimize_derivative_free(
        |p| match prepared.loss(p, y) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &x0,
        optimizer,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let result = result?;
    Ok(QmlFit {
        parameters: result.best_parameters.clone(),
        optimizer: result,
    })
}

/// Real predictions for regression, probability rows for classification.
pub fn predict_qml(
    spec: &QmlModelSpec,
    parameters: &[f64],
    x: &[Vec<f64>],
) -> Result<Predictions, TrainError> {
    let prepared = Prepared::new(spec, x)?;
    Ok(match prepared.outputs(parameters)? {
        Output::Scalar(v) => Predictions::Real(v),
        Output::Distribution(rows) => Predictions::Probabilities(rows),
    })
}

/// Exact gradient of the regression MSE: parameter-shift for the circuit
/// angles, closed form for the affine pair.
pub fn regression_gradient(
    spec: &QmlModelSpec,
    parameters: &[f64],
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<Vec<f64>, TrainError> {
    if spec.task != QmlTask::Regression {
        return Err(TrainError::TaskMismatch);
    }
    let prepared = Prepared::new(spec, x)?;
    let Output::Scalar(pred) = prepared.outputs(parameters)? else {
        return Err(TrainError::TaskMismatch);
    };
    let k = spec.ansatz_parameter_count();
    let (theta, affine) = parameters.split_at(k);
    let observable = spec.readout.observable();
    let n = y.len() as f64;
    let mut grad = vec![0.0; k + 2];
    let bound = prepared.ansatz.bind_slice(theta)?;
    for ((state, p), t) in prepared.states.iter().zip(&pred).zip(y) {
        let residual = 2.0 * (p - t) / n;
        let d = parameter_shift_gradient(&prepared.ansatz, &observable, theta, Some(state))?;
        for (g, di) in grad.iter_mut().zip(&d) {
            *g += residual * affine[0] * di;
        }
        grad[k] += residual * expectation(&simulate(&bound, Some(state))?, &observable)?;
        grad[k + 1] += residual;
    }
    Ok(grad)
}

/// Trained hybrid model with its feature scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedQml {
    pub spec: QmlModelSpec,
    pub parameters: Vec<f64>,
    pub scaler: Standardizer,
    pub best_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// [`Model`] adapter that z-scores features on each training split.
#[derive(Debug, Clone, PartialEq)]
pub struct QmlModel {
    pub spec: QmlModelSpec,
    pub optimizer: CobylaConfig,
    pub standardize_features: bool,
}

impl QmlModel {
    pub fn new(spec: QmlModelSpec) -> Self {
        Self {
            spec,
            optimizer: CobylaConfig::default(),
            standardize_features: true,
        }
    }
}

impl Model for QmlModel {
    type Fitted = FittedQml;

    fn name(&self) -> String {
        format!(
            "ZZFeatureMap+RealAmplitudes(reps={})",
            self.spec.ansatz_reps
        )
    }

    fn optimizer_name(&self) -> &'static str {
        "COBYLA"
    }

    fn config(&self) -> serde_json::Value {
        serde_json::json!({
            "model": "qml",
            "spec": self.spec,
            "optimizer": self.optimizer,
            "standardize_features": self.standardize_features,
        })
    }

    fn is_classifier(&self) -> bool {
        matches!(self.spec.task, QmlTask::Classification { .. })
    }

    fn fit(&self, x: &[Vec<f64>], y: &Targets, seed: u64) -> Result<FittedQml, TrainError> {
        check_rows(x, self.spec.n_qubits)?;
        let scaler = if self.standardize_features {
            Standardizer::fit(x)
        } else {
            Standardizer::identity(self.spec.n_qubits)
        };
        let fit = fit_qml(&self.spec, &scaler.transform(x), y, &self.optimizer, seed)?;
        Ok(FittedQml {
            spec: self.spec,
            parameters: fit.parameters,
            scaler,
            best_objective: fit.optimizer.best_objective,
            evaluations: fit.optimizer.evaluations,
            converged: fit.optimizer.converged,
        })
    }

    fn predict(&self, fitted: &FittedQml, x: &[Vec<f64>]) -> Result<Predictions, TrainError> {
        predict_qml(&fitted.spec, &fitted.parameters, &fitted.scaler.transform(x))
    }
}
