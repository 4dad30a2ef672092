//! COBYLA for unconstrained problems.
//!
//! The method keeps `n + 1` interpolation points, fits the unique linear
//! model through them and steps a distance `ρ` down the model gradient. The
//! simplex is kept well conditioned by the acceptability test on vertex
//! edge lengths (`≤ 2.1ρ`) and distances to opposite faces (`≥ 0.25ρ`),
//! and `ρ` is halved down to `ρ_end` once neither kind of step helps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
const GAMMA: f64 = 0.5;
const DELTA: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CobylaConfig {
    pub max_evals: usize,
    pub rho_start: f64,
    pub rho_end: f64,
}

impl Default for CobylaConfig {
    fn default() -> Self {
        Self {
            max_evals: 1000,
            rho_start: 0.5,
            rho_end: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    pub best_parameters: Vec<f64>,
    pub best_objective: f64,
    pub evaluations: usize,
    /// True when `ρ` reached `ρ_end` before the evaluation budget ran out.
    pub converged: bool,
    /// `(evaluation index, best objective so far)`, one entry per evaluation.
    pub trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("objective is not finite at {point:?}")]
    NonFiniteObjective { point: Vec<f64> },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

struct Budget<F> {
    objective: F,
    max: usize,
    best_x: Vec<f64>,
    best_f: f64,
    trace: Vec<(usize, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Budget<F> {
    /// `Ok(None)` once the budget is spent.
    fn eval(&mut self, x: &DVector<f64>) -> Result<Option<f64>, OptimizeError> {
        if self.trace.len() >= self.max {
            return Ok(None);
        }
        let f = (self.objective)(x.as_slice());
        if !f.is_finite() {
            return Err(OptimizeError::NonFiniteObjective {
                point: x.as_slice().to_vec(),
            });
        }
        if f < self.best_f {
            self.best_f = f;
            self.best_x = x.as_slice().to_vec();
        }
        self.trace.push((self.trace.len() + 1, self.best_f));
        Ok(Some(f))
    }

    fn finish(self, converged: bool) -> OptimizerResult {
        OptimizerResult {
            best_parameters: self.best_x,
            best_objective: self.best_f,
            evaluations: self.trace.len(),
            converged,
            trace: self.trace,
        }
    }
}

/// Minimizes `objective` from `x0`. Deterministic given its inputs.
pub fn minimize_derivative_free<F>(
    objective: F,
    x0: &[f64],
    config: &CobylaConfig,
) -> Result<OptimizerResult, OptimizeError>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(config.rho_start > 0.0 && config.rho_end > 0.0 && config.rho_end <= config.rho_start) {
        return Err(OptimizeError::InvalidConfig(
            "need 0 < rho_end <= rho_start".into(),
        ));
    }
    let n = x0.len();
    let mut budget = Budget {
        objective,
        max: config.max_evals,
        best_x: x0.to_vec(),
        best_f: f64::INFINITY,
        trace: Vec::new(),
    };
    macro_rules! eval_or_stop {
        ($x:expr) => {
            match budget.eval(&$x)? {
                Some(f) => f,
                None => return Ok(budget.finish(false)),
            }
        };
    }

    let mut rho = config.rho_start;
    let start = DVector::from_column_slice(x0);
    let f0 = eval_or_stop!(start);
    if n == 0 {
        return Ok(budget.finish(true));
    }
    let mut pts = vec![start];
    let mut fv = vec![f0];
    let mut best = 0;

    let build_simplex = |pts: &mut Vec<DVector<f64>>,
                             fv: &mut Vec<f64>,
                             best: &mut usize,
                             rho: f64,
                             budget: &mut Budget<F>|
     -> Result<bool, OptimizeError> {
        let base = pts[*best].clone();
        let fb = fv[*best];
        pts.clear();
        fv.clear();
        pts.push(base);
        fv.push(fb);
        *best = 0;
        for j in 0..n {
            let mut x = pts[*best].clone();
            x[j] += rho;
            let Some(f) = budget.eval(&x)? else {
                return Ok(false);
            };
            pts.push(x);
            fv.push(f);
            if f < fv[*best] {
                *best = pts.len() - 1;
            }
        }
        Ok(true)
    };
    if !build_simplex(&mut pts, &mut fv, &mut best, rho, &mut budget)? {
        return Ok(budget.finish(false));
    }

    let mut after_trust_step = false;
    loop {
        for j in 0..=n {
            if fv[j] < fv[best] {
                best = j;
            }
        }
        let others: Vec<usize> = (0..=n).filter(|&j| j != best).collect();
        let base = pts[best].clone();
        let sim = DMatrix::from_fn(n, n, |i, k| pts[others[k]][i] - base[i]);
        let Some(simi) = sim.clone().try_inverse() else {
            // Lost affine independence; rebuild around the best point.
            if !build_simplex(&mut pts, &mut fv, &mut best, rho, &mut budget)? {
                return Ok(budget.finish(false));
            }
            after_trust_step = false;
            continue;
        };
        let vsig: Vec<f64> = (0..n).map(|k| 1.0 / simi.row(k).norm()).collect();
        let veta: Vec<f64> = (0..n).map(|k| sim.column(k).norm()).collect();
        let acceptable = (0..n).all(|k| vsig[k] >= ALPHA * rho && veta[k] <= BETA * rho);
        let df = DVector::from_fn(n, |k, _| fv[others[k]] - fv[best]);
        let grad = simi.transpose() * &df;

        if !(after_trust_step || acceptable) {
            // Geometry step: move the worst vertex off its opposite face.
            let k = match (0..n)
                .filter(|&k| veta[k] > BETA * rho)
                .max_by(|&a, &b| veta[a].total_cmp(&veta[b]))
            {
                Some(k) => k,
                None => (0..n)
                    .min_by(|&a, &b| vsig[a].total_cmp(&vsig[b]))
                    .expect("n > 0"),
            };
            let mut dx: DVector<f64> = simi.row(k).transpose() * (GAMMA * rho * vsig[k]);
            if grad.dot(&dx) > 0.0 {
                dx = -dx;
            }
            let x = &base + dx;
            let f = eval_or_stop!(x);
            pts[others[k]] = x;
            fv[others[k]] = f;
            continue;
        }

        // Trust-region step on the linear model.
        after_trust_step = true;
        let gnorm = grad.norm();
        let mut reduce = true;
        if gnorm > 0.0 && gnorm.is_finite() {
            let dx = &grad * (-rho / gnorm);
            let predicted = rho * gnorm;
            let x = &base + &dx;
            let f = eval_or_stop!(x);
            let actual = fv[best] - f;

            let coeffs = &simi * &dx;
            let mut ratio = if actual <= 0.0 { 1.0 } else { 0.0 };
            let mut drop = None;
            let mut sigbar = vec![0.0; n];
            for k in 0..n {
                let t = coeffs[k].abs();
                if t > ratio {
                    drop = Some(k);
                    ratio = t;
                }
                sigbar[k] = t * vsig[k];
            }
            let mut edge_max = DELTA * rho;
            for k in 0..n {
                if sigbar[k] >= ALPHA * rho || sigbar[k] >= vsig[k] {
                    let edge = if actual > 0.0 {
                        (&x - &pts[others[k]]).norm()
                    } else {
                        veta[k]
                    };
                    if edge > edge_max {
                        drop = Some(k);
                        edge_max = edge;
                    }
                }
            }
            if let Some(k) = drop {
                pts[others[k]] = x;
                fv[others[k]] = f;
                if actual > 0.0 && actual >= 0.1 * predicted {
                    reduce = false;
                }
            }
        }
        if !reduce {
            continue;
        }
        if !acceptable {
            after_trust_step = false;
            continue;
        }
        if rho > config.rho_end {
            rho *= 0.5;
            if rho <= 1.5 * config.rho_end {
                rho = config.rho_end;
            }
            continue;
        }
        return Ok(budget.finish(true));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn quadratic_bowl() {
        let r = minimize_derivative_free(sphere, &[1.0, 1.0], &CobylaConfig::default()).unwrap();
        assert!(r.best_objective < 1e-6, "{}", r.best_objective);
        let hit = r.trace.iter().find(|(_, f)| *f < 1e-6).unwrap().0;
        assert!(hit <= 200, "needed {hit} evaluations");
        assert!(r.converged);
    }

    #[test]
    fn shifted_parabola() {
        let r = minimize_derivative_free(|x| (x[0] - 3.0).powi(2), &[0.0], &CobylaConfig::default())
            .unwrap();
        assert!((r.best_parameters[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn rosenbrock_progress() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let cfg = CobylaConfig {
            max_evals: 5000,
            rho_start: 0.5,
            rho_end: 1e-6,
        };
        let r = minimize_derivative_free(f, &[-1.2, 1.0], &cfg).unwrap();
        // The linear model crawls along the valley; a reference COBYLA ends
        // near 3e-3 under the same budget.
        assert!(r.best_objective < 1e-2, "{}", r.best_objective);
    }

    #[test]
    fn trace_is_monotone_and_complete() {
        let r = minimize_derivative_free(sphere, &[0.3, -2.0, 1.5, 0.7], &CobylaConfig::default())
            .unwrap();
        assert_eq!(r.trace.len(), r.evaluations);
        assert!(r.trace.windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(r.trace.iter().enumerate().all(|(i, (k, _))| *k == i + 1));
        assert_eq!(r.trace.last().unwrap().1, r.best_objective);
    }

    #[test]
    fn budget_boundary() {
        let cfg = CobylaConfig {
            max_evals: 3,
            ..CobylaConfig::default()
        };
        let r = minimize_derivative_free(sphere, &[1.0, 1.0], &cfg).unwrap();
        assert!(!r.converged);
        assert!(r.evaluations <= 3);
    }

    #[test]
    fn non_finite_objective() {
        let err = minimize_derivative_free(|x| 1.0 / x[0], &[0.0], &CobylaConfig::default());
        assert!(matches!(err, Err(OptimizeError::NonFiniteObjective { .. })));
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(4) + x[0] * x[1];
        let a = minimize_derivative_free(f, &[0.2, 0.1], &CobylaConfig::default()).unwrap();
        let b = minimize_derivative_free(f, &[0.2, 0.1], &CobylaConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
