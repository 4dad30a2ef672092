use num_complex::Complex64;

use super::circuit::{Circuit, Gate};
use super::{QsimError, Result, MAX_QUBITS};

/// 2^n complex amplitudes, qubit 0 as least-significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(n));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the vector
    /// is normalized.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(QsimError::DimensionMismatch {
                expected: len.next_power_of_two().max(1),
                actual: len,
            });
        }
        let n = len.trailing_zeros() as usize;
        if n > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(n));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(Self { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn apply_single(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let j = i | bit;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_controlled(&mut self, control: usize, target: usize, m: [[Complex64; 2]; 2]) {
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cbit != 0 && i & tbit == 0 {
                let j = i | tbit;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_zz(&mut self, a: usize, b: usize, theta: f64) {
        // exp(-i θ/2 Z⊗Z): phase e^{-iθ/2} on even parity, e^{+iθ/2} on odd.
        let even = Complex64::from_polar(1.0, -theta / 2.0);
        let odd = even.conj();
        for (i, amp) in self.amps.iter_mut().enumerate() {
            let parity = ((i >> a) ^ (i >> b)) & 1;
            *amp *= if parity == 0 { even } else { odd };
        }
    }

    pub(crate) fn apply(&mut self, gate: &Gate) -> Result<()> {
        let theta = gate.angle()?;
        match *gate {
            Gate::H(q) => self.apply_single(q, hadamard()),
            Gate::Rx(q, _) => self.apply_single(q, rx(theta)),
            Gate::Ry(q, _) => self.apply_single(q, ry(theta)),
            Gate::Rz(q, _) => self.apply_single(q, rz(theta)),
            Gate::Cx { control, target } => self.apply_controlled(control, target, pauli_x()),
            Gate::Crx { control, target, .. } => self.apply_controlled(control, target, rx(theta)),
            Gate::ZzPhase(a, b, _) => self.apply_zz(a, b, theta),
        }
        Ok(())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn hadamard() -> [[Complex64; 2]; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]
}

pub(crate) fn pauli_x() -> [[Complex64; 2]; 2] {
    [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]
}

pub(crate) fn rx(t: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (t / 2.0).sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

pub(crate) fn ry(t: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (t / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

pub(crate) fn rz(t: f64) -> [[Complex64; 2]; 2] {
    [
        [Complex64::from_polar(1.0, -t / 2.0), c(0.0, 0.0)],
        [c(0.0, 0.0), Complex64::from_polar(1.0, t / 2.0)],
    ]
}

/// Runs a fully bound circuit on `initial` (or `|0…0⟩`).
pub fn simulate(circuit: &Circuit, initial: Option<&StateVector>) -> Result<StateVector> {
    if let Some(name) = circuit.free_parameters().first() {
        return Err(QsimError::UnboundParameter(name.clone()));
    }
    let mut state = match initial {
        Some(s) if s.n != circuit.n_qubits() => {
            return Err(QsimError::DimensionMismatch {
                expected: circuit.n_qubits(),
                actual: s.n,
            })
        }
        Some(s) => s.clone(),
        None => StateVector::zero(circuit.n_qubits())?,
    };
    for g in circuit.gates() {
        state.apply(g)?;
    }
    Ok(state)
}

/// Maps each basis index to a class label.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassMap {
    /// `k mod classes`.
    Modulo(usize),
    /// Explicit label per basis index.
    Table(Vec<usize>),
}

impl ClassMap {
    pub fn n_classes(&self) -> usize {
        match self {
            ClassMap::Modulo(c) => *c,
            ClassMap::Table(t) => t.iter().max().map_or(0, |m| m + 1),
        }
    }

    pub fn label(&self, basis_index: usize) -> usize {
        match self {
            ClassMap::Modulo(c) => basis_index % c,
            ClassMap::Table(t) => t[basis_index],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    ZOn(usize),
    MeanZ,
    BasisProbabilityAggregate(ClassMap),
}

/// Scalar expectation of `Z_q` or of the qubit-averaged `Z`.
pub fn expectation(state: &StateVector, observable: &Observable) -> Result<f64> {
    match observable {
        Observable::ZOn(q) => {
            if *q >= state.n {
                return Err(QsimError::DimensionMismatch {
                    expected: state.n,
                    actual: *q + 1,
                });
            }
            Ok(z_on(state, *q))
        }
        Observable::MeanZ => {
            if state.n == 0 {
                return Ok(0.0);
            }
            Ok((0..state.n).map(|q| z_on(state, q)).sum::<f64>() / state.n as f64)
        }
        Observable::BasisProbabilityAggregate(_) => Err(QsimError::NotScalar),
    }
}

fn z_on(state: &StateVector, q: usize) -> f64 {
    state
        .amps
        .iter()
        .enumerate()
        .map(|(k, a)| if (k >> q) & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum()
}

/// Per-class probability mass under `class_map`.
pub fn probability_aggregate(state: &StateVector, class_map: &ClassMap) -> Result<Vec<f64>> {
    if let ClassMap::Table(t) = class_map {
        if t.len() != state.amps.len() {
            return Err(QsimError::DimensionMismatch {
                expected: state.amps.len(),
                actual: t.len(),
            });
        }
    }
    let mut out = vec![0.0; class_map.n_classes()];
    for (k, a) in state.amps.iter().enumerate() {
        out[class_map.label(k)] += a.norm_sqr();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::Param;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    #[test]
    fn empty_circuit_keeps_initial_state() {
        let c = Circuit::new(2).unwrap();
        let init = StateVector::from_amplitudes(vec![c64(0.5, 0.0), c64(0.0, 0.5), c64(0.5, 0.0), c64(0.0, -0.5)]).unwrap();
        assert_eq!(simulate(&c, Some(&init)).unwrap(), init);
    }

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hadamard_on_qubit_zero() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::H(0)).unwrap();
        let s = simulate(&c, None).unwrap();
        let expected = [FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a.re - e).abs() < 1e-15 && a.im.abs() < 1e-15);
        }
    }

    #[test]
    fn ry_expectation_is_cosine() {
        for theta in [0.0, 0.3, FRAC_PI_2, 2.0, PI] {
            let mut c = Circuit::new(1).unwrap();
            c.push(Gate::Ry(0, Param::Bound(theta))).unwrap();
            let s = simulate(&c, None).unwrap();
            let z = expectation(&s, &Observable::ZOn(0)).unwrap();
            assert!((z - theta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_z_of_zero_state_is_one() {
        let s = StateVector::zero(3).unwrap();
        assert_eq!(expectation(&s, &Observable::MeanZ).unwrap(), 1.0);
    }

    #[test]
    fn unbound_circuit_is_rejected() {
        let mut c = Circuit::new(1).unwrap();
        c.push(Gate::Rx(0, Param::free("t"))).unwrap();
        assert_eq!(simulate(&c, None), Err(QsimError::UnboundParameter("t".into())));
    }

    #[test]
    fn aggregate_requires_matching_table() {
        let s = StateVector::zero(2).unwrap();
        assert!(probability_aggregate(&s, &ClassMap::Table(vec![0, 1])).is_err());
        assert!(matches!(
            expectation(&s, &Observable::BasisProbabilityAggregate(ClassMap::Modulo(2))),
            Err(QsimError::NotScalar)
        ));
        assert!(expectation(&s, &Observable::ZOn(2)).is_err());
    }

    #[test]
    fn cx_flips_target_when_control_set() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::Rx(0, Param::Bound(PI))).unwrap();
        c.push(Gate::Cx { control: 0, target: 1 }).unwrap();
        let p = simulate(&c, None).unwrap().probabilities();
        assert!((p[3] - 1.0).abs() < 1e-12);
    }
}
