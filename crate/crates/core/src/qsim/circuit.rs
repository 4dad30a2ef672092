use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::{QsimError, Result, MAX_QUBITS};

/// A gate angle: either a concrete value in radians or a named slot.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Bound(f64),
    Free(String),
}

impl Param {
    pub fn free(name: impl Into<String>) -> Self {
        Param::Free(name.into())
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Param::Bound(v) => Some(*v),
            Param::Free(_) => None,
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Bound(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    Rx,
    Ry,
    Rz,
    Cx,
    Crx,
    ZzPhase,
}

impl GateKind {
    pub fn label(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Cx => "CX",
            GateKind::Crx => "CRX",
            GateKind::ZzPhase => "ZZ",
        }
    }
}

/// One gate. Two-qubit gates list the control (or first) qubit first.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    Rx(usize, Param),
    Ry(usize, Param),
    Rz(usize, Param),
    Cx { control: usize, target: usize },
    Crx { control: usize, target: usize, angle: Param },
    ZzPhase(usize, usize, Param),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::Rx(..) => GateKind::Rx,
            Gate::Ry(..) => GateKind::Ry,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Cx { .. } => GateKind::Cx,
            Gate::Crx { .. } => GateKind::Crx,
            Gate::ZzPhase(..) => GateKind::ZzPhase,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Cx { control, target } | Gate::Crx { control, target, .. } => {
                vec![control, target]
            }
            Gate::ZzPhase(a, b, _) => vec![a, b],
        }
    }

    pub fn param(&self) -> Option<&Param> {
        match self {
            Gate::H(_) | Gate::Cx { .. } => None,
            Gate::Rx(_, p) | Gate::Ry(_, p) | Gate::Rz(_, p) | Gate::ZzPhase(_, _, p) => Some(p),
            Gate::Crx { angle, .. } => Some(angle),
        }
    }

    pub(crate) fn param_mut(&mut self) -> Option<&mut Param> {
        match self {
            Gate::H(_) | Gate::Cx { .. } => None,
            Gate::Rx(_, p) | Gate::Ry(_, p) | Gate::Rz(_, p) | Gate::ZzPhase(_, _, p) => Some(p),
            Gate::Crx { angle, .. } => Some(angle),
        }
    }

    /// Concrete angle, or `UnboundParameter`. Zero for parameterless gates.
    pub(crate) fn angle(&self) -> Result<f64> {
        match self.param() {
            None => Ok(0.0),
            Some(Param::Bound(v)) => Ok(*v),
            Some(Param::Free(name)) => Err(QsimError::UnboundParameter(name.clone())),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qubits = self
            .qubits()
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join(",");
        write!(f, "{} {}", self.kind().label(), qubits)?;
        match self.param() {
            Some(Param::Bound(v)) => write!(f, " {v}"),
            Some(Param::Free(name)) => write!(f, " {name}"),
            None => Ok(()),
        }
    }
}

/// An ordered gate program over `n` qubits.
///
/// `free_parameters` always lists the unbound names in first-appearance
/// order; it is maintained by [`Circuit::push`].
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
    free_parameters: Vec<String>,
}

impl Circuit {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(n));
        }
        Ok(Self {
            n,
            gates: Vec::new(),
            free_parameters: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn free_parameters(&self) -> &[String] {
        &self.free_parameters
    }

    pub fn is_bound(&self) -> bool {
        self.free_parameters.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        let qubits = gate.qubits();
        for &q in &qubits {
            if q >= self.n {
                return Err(QsimError::QubitOutOfRange { qubit: q, n: self.n });
            }
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(QsimError::RepeatedQubit(qubits[0]));
        }
        if let Some(Param::Free(name)) = gate.param() {
            if !self.free_parameters.contains(name) {
                self.free_parameters.push(name.clone());
            }
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Appends every gate of `other`, which must act on the same register.
    pub fn compose(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n != self.n {
            return Err(QsimError::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        for g in &other.gates {
            self.push(g.clone())?;
        }
        Ok(self)
    }

    /// Binds every free parameter by name. Extra or missing names are errors.
    pub fn bind_parameters(&self, values: &BTreeMap<String, f64>) -> Result<Circuit> {
        if let Some(name) = values.keys().find(|k| !self.free_parameters.contains(k)) {
            return Err(QsimError::UnknownParameter(name.clone()));
        }
        if let Some(name) = self.free_parameters.iter().find(|p| !values.contains_key(*p)) {
            return Err(QsimError::MissingParameter(name.clone()));
        }
        Ok(self.bind_with(|name| values[name]))
    }

    /// Binds parameters positionally, in `free_parameters` order.
    pub fn bind_slice(&self, values: &[f64]) -> Result<Circuit> {
        if values.len() != self.free_parameters.len() {
            return Err(QsimError::DimensionMismatch {
                expected: self.free_parameters.len(),
                actual: values.len(),
            });
        }
        let index: HashMap<&str, usize> = self
            .free_parameters
            .iter()
            .enumerate()
            .map(|(i, name)| (name.as_str(), i))
            .collect();
        Ok(self.bind_with(|name| values[index[name]]))
    }

    fn bind_with(&self, lookup: impl Fn(&str) -> f64) -> Circuit {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let mut g = g.clone();
                if let Some(p) = g.param_mut() {
                    if let Param::Free(name) = p {
                        *p = Param::Bound(lookup(name));
                    }
                }
                g
            })
            .collect();
        Circuit {
            n: self.n,
            gates,
            free_parameters: Vec::new(),
        }
    }

    pub(crate) fn gate_param_mut(&mut self, index: usize) -> Option<&mut Param> {
        self.gates.get_mut(index).and_then(Gate::param_mut)
    }

    /// One gate per line: `KIND q[,q2] [param-name|value]`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}
