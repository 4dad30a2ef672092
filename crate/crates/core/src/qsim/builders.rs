use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, Gate, Param};
use super::{QsimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglementScheme {
    Linear,
    ReverseLinear,
    Full,
    Custom,
}

impl fmt::Display for EntanglementScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntanglementScheme::Linear => "linear",
            EntanglementScheme::ReverseLinear => "reverse_linear",
            EntanglementScheme::Full => "full",
            EntanglementScheme::Custom => "custom",
        })
    }
}

impl FromStr for EntanglementScheme {
    type Err = QsimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(EntanglementScheme::Linear),
            "reverse_linear" => Ok(EntanglementScheme::ReverseLinear),
            "full" => Ok(EntanglementScheme::Full),
            "custom" => Ok(EntanglementScheme::Custom),
            other => Err(QsimError::InvalidGraph(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Ordered two-qubit couplings used by feature maps and entangler layers.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    scheme: EntanglementScheme,
}

impl EntanglementGraph {
    /// Builds one of the named schemes. `Custom` must go through
    /// [`EntanglementGraph::custom`].
    pub fn new(scheme: EntanglementScheme, n: usize) -> Result<Self> {
        let edges = match scheme {
            EntanglementScheme::Linear => (1..n).map(|j| (j - 1, j)).collect(),
            EntanglementScheme::ReverseLinear => (1..n).rev().map(|j| (j - 1, j)).collect(),
            EntanglementScheme::Full => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            EntanglementScheme::Custom => {
                return Err(QsimError::InvalidGraph(
                    "custom graphs need an explicit edge list".into(),
                ))
            }
        };
        Ok(Self { n, edges, scheme })
    }

    pub fn custom(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for (k, &(i, j)) in edges.iter().enumerate() {
            if i == j {
                return Err(QsimError::InvalidGraph(format!("self-loop on qubit {i}")));
            }
            if i >= n || j >= n {
                return Err(QsimError::QubitOutOfRange { qubit: i.max(j), n });
            }
            if edges[..k].contains(&(i, j)) {
                return Err(QsimError::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Self {
            n,
            edges,
            scheme: EntanglementScheme::Custom,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn scheme(&self) -> EntanglementScheme {
        self.scheme
    }
}

/// ZZ feature map knobs. Defaults: `alpha = 2`, `phi1(x) = x`,
/// `phi2(a, b) = (π − a)(π − b)`.
#[derive(Clone, Copy)]
pub struct FeatureMapOptions {
    pub alpha: f64,
    pub phi1: fn(f64) -> f64,
    pub phi2: fn(f64, f64) -> f64,
}

impl Default for FeatureMapOptions {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            phi1: |x| x,
            phi2: |a, b| (PI - a) * (PI - b),
        }
    }
}

impl fmt::Debug for FeatureMapOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureMapOptions")
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

/// Second-order Pauli-Z evolution encoding of `x`.
///
/// `H` on every qubit, then `reps` repetitions of the single-qubit phases
/// `exp(i·α·φ1(x_j)·Z_j)` followed by the pairwise phases
/// `exp(i·α·φ2(x_i, x_j)·Z_i Z_j)` in edge order. With the half-angle gate
/// convention those are `RZ(−2αφ1)` and `ZZ(−2αφ2)`.
pub fn build_zz_feature_map(
    x: &[f64],
    reps: usize,
    graph: &EntanglementGraph,
    options: &FeatureMapOptions,
) -> Result<Circuit> {
    let n = x.len();
    if graph.n_qubits() != n {
        return Err(QsimError::DimensionMismatch {
            expected: graph.n_qubits(),
            actual: n,
        });
    }
    if reps == 0 {
        return Err(QsimError::ZeroReps);
    }
    let mut c = Circuit::new(n)?;
    for q in 0..n {
        c.push(Gate::H(q))?;
    }
    for _ in 0..reps {
        for (q, &xq) in x.iter().enumerate() {
            c.push(Gate::Rz(q, Param::Bound(-2.0 * options.alpha * (options.phi1)(xq))))?;
        }
        for &(i, j) in graph.edges() {
            let angle = -2.0 * options.alpha * (options.phi2)(x[i], x[j]);
            c.push(Gate::ZzPhase(i, j, Param::Bound(angle)))?;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RealAmplitudesOptions {
    /// Emit a rotation layer after the last entangler.
    pub final_rotation_layer: bool,
}

impl Default for RealAmplitudesOptions {
    fn default() -> Self {
        Self {
            final_rotation_layer: true,
        }
    }
}

/// RealAmplitudes: `reps` rounds of `RY(theta_{l}_{q})` on each qubit then
/// CX along the graph, optionally closed by one more RY layer.
///
/// Parameter names are `theta_{layer}_{qubit}` in layer-major order, so the
/// circuit has `n·reps` or `n·(reps+1)` free parameters.
pub fn build_real_amplitudes(
    n: usize,
    reps: usize,
    graph: &EntanglementGraph,
    options: &RealAmplitudesOptions,
) -> Result<Circuit> {
    if graph.n_qubits() != n {
        return Err(QsimError::DimensionMismatch {
            expected: graph.n_qubits(),
            actual: n,
        });
    }
    if reps == 0 {
        return Err(QsimError::ZeroReps);
    }
    let mut c = Circuit::new(n)?;
    let rotation_layer = |c: &mut Circuit, layer: usize| -> Result<()> {
        for q in 0..n {
            c.push(Gate::Ry(q, Param::free(format!("theta_{layer}_{q}"))))?;
        }
        Ok(())
    };
    for layer in 0..reps {
        rotation_layer(&mut c, layer)?;
        for &(control, target) in graph.edges() {
            c.push(Gate::Cx { control, target })?;
        }
    }
    if options.final_rotation_layer {
        rotation_layer(&mut c, reps)?;
    }
    Ok(c)
}
