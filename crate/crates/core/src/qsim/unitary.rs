use nalgebra::DMatrix;
use num_complex::Complex64;

use super::circuit::{Circuit, Gate};
use super::{QsimError, Result, MAX_UNITARY_QUBITS};

pub type DenseMatrix = DMatrix<Complex64>;

fn pauli(label: char) -> DenseMatrix {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match label {
        'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => unreachable!(),
    }
}

/// `exp(-i t/2 P)` for an involutory `P`.
fn rotation(p: &DenseMatrix, t: f64) -> DenseMatrix {
    let dim = p.nrows();
    DenseMatrix::identity(dim, dim) * Complex64::new((t / 2.0).cos(), 0.0)
        - p * Complex64::new(0.0, (t / 2.0).sin())
}

/// Local matrix in the basis `b0 + 2·b1`, `b0` the first listed qubit.
fn local_matrix(gate: &Gate) -> Result<DenseMatrix> {
    let t = gate.angle()?;
    let h = (pauli('X') + pauli('Z')) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    // kron(second, first) puts the first qubit on the low bit.
    let controlled = |u: DenseMatrix| {
        let p0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]).map(|v| Complex64::new(v, 0.0));
        let p1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]).map(|v| Complex64::new(v, 0.0));
        pauli('I').kronecker(&p0) + u.kronecker(&p1)
    };
    Ok(match gate {
        Gate::H(_) => h,
        Gate::Rx(..) => rotation(&pauli('X'), t),
        Gate::Ry(..) => rotation(&pauli('Y'), t),
        Gate::Rz(..) => rotation(&pauli('Z'), t),
        Gate::Cx { .. } => controlled(pauli('X')),
        Gate::Crx { .. } => controlled(rotation(&pauli('X'), t)),
        Gate::ZzPhase(..) => rotation(&pauli('Z').kronecker(&pauli('Z')), t),
    })
}

/// Lifts a local gate matrix to the full register.
fn embed(local: &DenseMatrix, qubits: &[usize], n: usize) -> DenseMatrix {
    let dim = 1usize << n;
    let mask: usize = qubits.iter().map(|q| 1usize << q).sum();
    let sub = |k: usize| -> usize {
        qubits
            .iter()
            .enumerate()
            .map(|(pos, q)| ((k >> q) & 1) << pos)
            .sum()
    };
    DenseMatrix::from_fn(dim, dim, |i, j| {
        if i & !mask == j & !mask {
            local[(sub(i), sub(j))]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Dense `2^n × 2^n` unitary of a fully bound circuit.
///
/// Built from gate matrices by explicit embedding and matrix products,
/// independent of the in-place update kernels in [`super::simulate`].
pub fn circuit_unitary(circuit: &Circuit) -> Result<DenseMatrix> {
    let n = circuit.n_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(QsimError::TooManyQubits(n));
    }
    if let Some(name) = circuit.free_parameters().first() {
        return Err(QsimError::UnboundParameter(name.clone()));
    }
    let dim = 1usize << n;
    let mut u = DenseMatrix::identity(dim, dim);
    for gate in circuit.gates() {
        let full = embed(&local_matrix(gate)?, &gate.qubits(), n);
        u = full * u;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::Param;

    fn re(m: &DenseMatrix) -> Vec<f64> {
        m.iter().map(|c| c.re).collect()
    }

    #[test]
    fn empty_circuit_is_identity() {
        let u = circuit_unitary(&Circuit::new(1).unwrap()).unwrap();
        assert_eq!(u, DenseMatrix::identity(2, 2));
    }

    #[test]
    fn cx_is_the_expected_permutation() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::Cx { control: 0, target: 1 }).unwrap();
        let u = circuit_unitary(&c).unwrap();
        // |01⟩ (index 1, qubit 0 set) <-> |11⟩ (index 3).
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        ]);
        assert_eq!(re(&u), expected.iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn too_many_qubits() {
        let c = Circuit::new(11).unwrap();
        assert_eq!(circuit_unitary(&c), Err(QsimError::TooManyQubits(11)));
    }

    #[test]
    fn unbound_rejected() {
        let mut c = Circuit::new(1).unwrap();
        c.push(Gate::Ry(0, Param::free("x"))).unwrap();
        assert!(circuit_unitary(&c).is_err());
    }
}
