use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_rows, Model, Predictions, Standardizer, Targets, TrainError};
use crate::rng;

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Raw affine output, trained with mean squared error.
    Linear,
    /// Softmax over `output_dim` classes, trained with cross-entropy.
    Softmax,
}

/// `Linear → ReLU → Dropout` per hidden width, then an affine head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub dropout_rate: f64,
    pub head: Head,
}

impl MlpSpec {
    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_dims);
        w.push(self.output_dim);
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One affine map; `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub layers: Vec<DenseLayer>,
}

impl MlpWeights {
    /// Uniform `±1/√fan_in` for weights and biases.
    pub fn init(spec: &MlpSpec, rng: &mut impl Rng) -> Self {
        let widths = spec.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                DenseLayer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-bound..=bound)),
                    bias: DVector::from_fn(w[1], |_, _| rng.random_range(-bound..=bound)),
                }
            })
            .collect();
        Self { layers }
    }

    fn check(&self, spec: &MlpSpec) -> Result<(), TrainError> {
        let widths = spec.widths();
        if self.layers.len() != widths.len() - 1 {
            return Err(TrainError::DimensionMismatch {
                expected: widths.len() - 1,
                actual: self.layers.len(),
            });
        }
        for (layer, w) in self.layers.iter().zip(widths.windows(2)) {
            if layer.weights.shape() != (w[1], w[0]) || layer.bias.len() != w[1] {
                return Err(TrainError::DimensionMismatch {
                    expected: w[1] * w[0],
                    actual: layer.weights.len(),
                });
            }
        }
        Ok(())
    }
}

/// Columns are samples.
fn to_columns(x: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, x.len(), |i, j| x[j][i])
}

fn softmax_columns(z: &mut DMatrix<f64>) {
    for mut col in z.column_iter_mut() {
        let max = col.max();
        col.apply(|v| *v = (*v - max).exp());
        let sum = col.sum();
        col /= sum;
    }
}

struct Forward {
    /// Input to each layer (post-dropout activations).
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<DMatrix<f64>>,
    /// Dropout multipliers of hidden layers (already scaled by 1/(1−p)).
    masks: Vec<Option<DMatrix<f64>>>,
    output: DMatrix<f64>,
}

fn forward(
    weights: &MlpWeights,
    x: DMatrix<f64>,
    dropout: Option<(f64, &mut dyn rand::RngCore)>,
) -> Forward {
    let n_layers = weights.layers.len();
    let mut inputs = vec![x];
    let mut pre = Vec::new();
    let mut masks = Vec::new();
    let mut dropout = dropout;
    for (l, layer) in weights.layers.iter().enumerate() {
        let a = inputs.last().expect("input present");
        let mut z = &layer.weights * a;
        for mut col in z.column_iter_mut() {
            col += &layer.bias;
        }
        if l + 1 == n_layers {
            return Forward {
                inputs,
                pre,
                masks,
                output: z,
            };
        }
        let mut h = z.map(|v| v.max(0.0));
        let mask = match dropout.as_mut() {
            Some((p, rng)) if *p > 0.0 => {
                let keep = 1.0 / (1.0 - *p);
                let m = DMatrix::from_fn(h.nrows(), h.ncols(), |_, _| {
                    if rng.random::<f64>() < *p {
                        0.0
                    } else {
                        keep
                    }
                });
                h.component_mul_assign(&m);
                Some(m)
            }
            _ => None,
        };
        pre.push(z);
        masks.push(mask);
        inputs.push(h);
    }
    unreachable!("at least one layer")
}

fn backward(
    spec: &MlpSpec,
    weights: &MlpWeights,
    fwd: Forward,
    y: &Targets,
) -> Result<(f64, Vec<DenseLayer>), TrainError> {
    let b = fwd.output.ncols();
    let mut out = fwd.output;
    let (loss, mut dz) = match (spec.head, y) {
        (Head::Linear, Targets::Real(t)) => {
            if spec.output_dim != 1 {
                return Err(TrainError::DimensionMismatch {
                    expected: 1,
                    actual: spec.output_dim,
                });
            }
            let denom = (b * spec.output_dim) as f64;
            let diff = DMatrix::from_fn(1, b, |_, j| out[(0, j)] - t[j]);
            (diff.norm_squared() / denom, diff * (2.0 / denom))
        }
        (Head::Softmax, Targets::Labels { labels, .. }) => {
            softmax_columns(&mut out);
            let mut loss = 0.0;
            for (j, &c) in labels.iter().enumerate() {
                if c >= spec.output_dim {
                    return Err(TrainError::DimensionMismatch {
                        expected: spec.output_dim,
                        actual: c + 1,
                    });
                }
                loss -= out[(c, j)].max(PROB_FLOOR).ln();
                out[(c, j)] -= 1.0;
            }
            (loss / b as f64, out / b as f64)
        }
        _ => return Err(TrainError::TaskMismatch),
    };

    let n_layers = weights.layers.len();
    let mut grads = Vec::with_capacity(n_layers);
    for l in (0..n_layers).rev() {
        let a = &fwd.inputs[l];
        grads.push(DenseLayer {
            weights: &dz * a.transpose(),
            bias: dz.column_sum(),
        });
        if l == 0 {
            break;
        }
        let mut da = weights.layers[l].weights.transpose() * &dz;
        if let Some(mask) = &fwd.masks[l - 1] {
            da.component_mul_assign(mask);
        }
        let z = &fwd.pre[l - 1];
        da.zip_apply(z, |g, zv| {
            if zv <= 0.0 {
                *g = 0.0
            }
        });
        dz = da;
    }
    grads.reverse();
    Ok((loss, grads))
}

/// Mean loss and its exact gradient with dropout disabled.
pub fn loss_and_gradient(
    spec: &MlpSpec,
    weights: &MlpWeights,
    x: &[Vec<f64>],
    y: &Targets,
) -> Result<(f64, Vec<DenseLayer>), TrainError> {
    weights.check(spec)?;
    check_rows(x, spec.input_dim)?;
    let fwd = forward(weights, to_columns(x, spec.input_dim), None);
    backward(spec, weights, fwd, y)
}

struct Adam {
    m: Vec<DenseLayer>,
    v: Vec<DenseLayer>,
    t: i32,
}

impl Adam {
    fn new(weights: &MlpWeights) -> Self {
        let zeros: Vec<DenseLayer> = weights
            .layers
            .iter()
            .map(|l| DenseLayer {
                weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                bias: DVector::zeros(l.bias.len()),
            })
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, weights: &mut MlpWeights, grads: &[DenseLayer], cfg: &MlpTrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        };
        for (((layer, g), m), v) in weights
            .layers
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            update(
                layer.weights.as_mut_slice(),
                g.weights.as_slice(),
                m.weights.as_mut_slice(),
                v.weights.as_mut_slice(),
            );
            update(
                layer.bias.as_mut_slice(),
                g.bias.as_slice(),
                m.bias.as_mut_slice(),
                v.bias.as_mut_slice(),
            );
        }
    }
}

/// Minibatch Adam training. Initialization, shuffling and dropout all draw
/// from one generator seeded by `seed`.
pub fn fit_mlp(
    spec: &MlpSpec,
    x: &[Vec<f64>],
    y: &Targets,
    config: &MlpTrainConfig,
    seed: u64,
) -> Result<MlpWeights, TrainError> {
    if x.is_empty() {
        return Err(TrainError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(TrainError::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if !(0.0..1.0).contains(&spec.dropout_rate) {
        return Err(TrainError::InvalidConfig(format!(
            "dropout rate {} outside [0, 1)",
            spec.dropout_rate
        )));
    }
    check_rows(x, spec.input_dim)?;
    let mut rng = rng::seeded(seed);
    let mut weights = MlpWeights::init(spec, &mut rng);
    let mut adam = Adam::new(&weights);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let batch = config.batch_size.max(1);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb: Vec<Vec<f64>> = chunk.iter().map(|&i| x[i].clone()).collect();
            let yb = y.select(chunk);
            let fwd = forward(
                &weights,
                to_columns(&xb, spec.input_dim),
                Some((spec.dropout_rate, &mut rng)),
            );
            let (loss, grads) = backward(spec, &weights, fwd, &yb)?;
            if !loss.is_finite() {
                return Err(TrainError::DivergenceDetected { epoch });
            }
            adam.step(&mut weights, &grads, config);
        }
    }
    Ok(weights)
}

/// Inference-mode forward pass.
pub fn predict_mlp(
    spec: &MlpSpec,
    weights: &MlpWeights,
    x: &[Vec<f64>],
) -> Result<Predictions, TrainError> {
    weights.check(spec)?;
    check_rows(x, spec.input_dim)?;
    let mut out = forward(weights, to_columns(x, spec.input_dim), None).output;
    Ok(match spec.head {
        Head::Linear => Predictions::Real(out.row(0).iter().copied().collect()),
        Head::Softmax => {
            softmax_columns(&mut out);
            Predictions::Probabilities(
                out.column_iter().map(|c| c.iter().copied().collect()).collect(),
            )
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedMlp {
    pub spec: MlpSpec,
    pub weights: MlpWeights,
    pub scaler: Standardizer,
}

/// [`Model`] adapter; input and output widths come from the data.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub hidden_dims: Vec<usize>,
    pub dropout_rate: f64,
    pub classifier: bool,
    pub train: MlpTrainConfig,
    pub standardize_features: bool,
}

impl MlpModel {
    pub fn new(hidden_dims: Vec<usize>, classifier: bool) -> Self {
        Self {
            hidden_dims,
            dropout_rate: 0.0,
            classifier,
            train: MlpTrainConfig::default(),
            standardize_features: true,
        }
    }
}

impl Model for MlpModel {
    type Fitted = FittedMlp;

    fn name(&self) -> String {
        format!("MLP(hidden_dims={:?})", self.hidden_dims)
    }

    fn optimizer_name(&self) -> &'static str {
        "Adam"
    }

    fn config(&self) -> serde_json::Value {
        serde_json::json!({
            "model": "mlp",
            "hidden_dims": self.hidden_dims,
            "dropout_rate": self.dropout_rate,
            "train": self.train,
            "standardize_features": self.standardize_features,
        })
    }

    fn is_classifier(&self) -> bool {
        self.classifier
    }

    fn fit(&self, x: &[Vec<f64>], y: &Targets, seed: u64) -> Result<FittedMlp, TrainError> {
        let input_dim = x.first().map_or(0, Vec::len);
        let (output_dim, head) = match (y, self.classifier) {
            (Targets::Real(_), false) => (1, Head::Linear),
            (Targets::Labels { n_classes, .. }, true) => (*n_classes, Head::Softmax),
            _ => return Err(TrainError::TaskMismatch),
        };
        let spec = MlpSpec {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            output_dim,
            dropout_rate: self.dropout_rate,
            head,
        };
        check_rows(x, input_dim)?;
        let scaler = if self.standardize_features {
            Standardizer::fit(x)
        } else {
            Standardizer::identity(input_dim)
        };
        let weights = fit_mlp(&spec, &scaler.transform(x), y, &self.train, seed)?;
        Ok(FittedMlp {
            spec,
            weights,
            scaler,
        })
    }

    fn predict(&self, fitted: &FittedMlp, x: &[Vec<f64>]) -> Result<Predictions, TrainError> {
        predict_mlp(&fitted.spec, &fitted.weights, &fitted.scaler.transform(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(input: usize, hidden: Vec<usize>, output: usize, head: Head) -> MlpSpec {
        MlpSpec {
            input_dim: input,
            hidden_dims: hidden,
            output_dim: output,
            dropout_rate: 0.0,
            head,
        }
    }

    #[test]
    fn recovers_linear_map() {
        let s = spec(1, vec![], 1, Head::Linear);
        let x: Vec<Vec<f64>> = (0..64).map(|i| vec![-1.0 + i as f64 / 32.0]).collect();
        let y = Targets::Real(x.iter().map(|r| 2.0 * r[0] + 1.0).collect());
        let cfg = MlpTrainConfig {
            epochs: 500,
            learning_rate: 0.01,
            ..MlpTrainConfig::default()
        };
        let w = fit_mlp(&s, &x, &y, &cfg, 0).unwrap();
        assert!((w.layers[0].weights[(0, 0)] - 2.0).abs() < 1e-2);
        assert!((w.layers[0].bias[0] - 1.0).abs() < 1e-2);
    }

    fn finite_difference_check(s: &MlpSpec, y: &Targets) {
        let mut rng = rng::seeded(9);
        let w = MlpWeights::init(s, &mut rng);
        let x: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..s.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let (_, grads) = loss_and_gradient(s, &w, &x, y).unwrap();
        let h = 1e-6;
        for (l, g) in grads.iter().enumerate() {
            for k in 0..g.weights.len() {
                let mut wp = w.clone();
                wp.layers[l].weights.as_mut_slice()[k] += h;
                let up = loss_and_gradient(s, &wp, &x, y).unwrap().0;
                wp.layers[l].weights.as_mut_slice()[k] -= 2.0 * h;
                let down = loss_and_gradient(s, &wp, &x, y).unwrap().0;
                let fd = (up - down) / (2.0 * h);
                let an = g.weights.as_slice()[k];
                assert!(
                    (fd - an).abs() <= 1e-5 * an.abs().max(1e-3),
                    "layer {l} weight {k}: {an} vs {fd}"
                );
            }
            for k in 0..g.bias.len() {
                let mut wp = w.clone();
                wp.layers[l].bias[k] += h;
                let up = loss_and_gradient(s, &wp, &x, y).unwrap().0;
                wp.layers[l].bias[k] -= 2.0 * h;
                let down = loss_and_gradient(s, &wp, &x, y).unwrap().0;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - g.bias[k]).abs() <= 1e-5 * g.bias[k].abs().max(1e-3));
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        finite_difference_check(
            &spec(3, vec![4, 3], 1, Head::Linear),
            &Targets::Real(vec![0.5, -1.0, 0.2, 1.5, 0.0]),
        );
        finite_difference_check(
            &spec(3, vec![4, 3], 3, Head::Softmax),
            &Targets::Labels {
                labels: vec![0, 2, 1, 1, 0],
                n_classes: 3,
            },
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let mut s = spec(2, vec![8], 1, Head::Linear);
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0, 1.0 - i as f64 / 20.0]).collect();
        let y = Targets::Real(x.iter().map(|r| r[0] * r[1]).collect());
        let cfg = MlpTrainConfig {
            epochs: 20,
            ..MlpTrainConfig::default()
        };
        assert_eq!(fit_mlp(&s, &x, &y, &cfg, 4).unwrap(), fit_mlp(&s, &x, &y, &cfg, 4).unwrap());
        s.dropout_rate = 0.3;
        assert_eq!(fit_mlp(&s, &x, &y, &cfg, 4).unwrap(), fit_mlp(&s, &x, &y, &cfg, 4).unwrap());
    }

    #[test]
    fn identity_layer_predicts_inputs() {
        let s = spec(1, vec![], 1, Head::Linear);
        let w = MlpWeights {
            layers: vec![DenseLayer {
                weights: DMatrix::from_element(1, 1, 1.0),
                bias: DVector::zeros(1),
            }],
        };
        let x = vec![vec![0.25], vec![-3.0]];
        assert_eq!(predict_mlp(&s, &w, &x).unwrap(), Predictions::Real(vec![0.25, -3.0]));
    }

    #[test]
    fn matches_hand_rolled_oracle() {
        // 2 inputs, 3 hidden ReLU units, 2-way softmax.
        let w1 = [[0.5, -0.2], [0.1, 0.4], [-0.3, 0.8]];
        let b1 = [0.05, -0.1, 0.2];
        let w2 = [[0.7, -0.5, 0.3], [-0.4, 0.6, 0.9]];
        let b2 = [0.1, -0.2];
        let s = spec(2, vec![3], 2, Head::Softmax);
        let w = MlpWeights {
            layers: vec![
                DenseLayer {
                    weights: DMatrix::from_fn(3, 2, |i, j| w1[i][j]),
                    bias: DVector::from_column_slice(&b1),
                },
                DenseLayer {
                    weights: DMatrix::from_fn(2, 3, |i, j| w2[i][j]),
                    bias: DVector::from_column_slice(&b2),
                },
            ],
        };
        let x = vec![vec![1.0, 2.0], vec![-0.5, 0.3]];
        let Predictions::Probabilities(rows) = predict_mlp(&s, &w, &x).unwrap() else {
            panic!()
        };
        for (row, input) in rows.iter().zip(&x) {
            let mut h = [0.0; 3];
            for i in 0..3 {
                let mut acc = b1[i];
                for j in 0..2 {
                    acc += w1[i][j] * input[j];
                }
                h[i] = if acc > 0.0 { acc } else { 0.0 };
            }
            let mut z = [0.0; 2];
            for i in 0..2 {
                let mut acc = b2[i];
                for j in 0..3 {
                    acc += w2[i][j] * h[j];
                }
                z[i] = acc;
            }
            let m = z[0].max(z[1]);
            let e = [(z[0] - m).exp(), (z[1] - m).exp()];
            let sum = e[0] + e[1];
            assert!((row[0] - e[0] / sum).abs() < 1e-12);
            assert!((row[1] - e[1] / sum).abs() < 1e-12);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let s = spec(2, vec![3], 1, Head::Linear);
        let w = MlpWeights::init(&s, &mut rng::seeded(0));
        assert!(matches!(
            predict_mlp(&s, &w, &[vec![1.0]]),
            Err(TrainError::DimensionMismatch { .. })
        ));
        let other = spec(3, vec![3], 1, Head::Linear);
        assert!(predict_mlp(&other, &w, &[vec![1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn divergence_detected() {
        let s = spec(1, vec![], 1, Head::Linear);
        let x = vec![vec![1e200], vec![-1e200]];
        let y = Targets::Real(vec![1e200, 0.0]);
        assert!(matches!(
            fit_mlp(&s, &x, &y, &MlpTrainConfig::default(), 0),
            Err(TrainError::DivergenceDetected { .. })
        ));
    }
}
