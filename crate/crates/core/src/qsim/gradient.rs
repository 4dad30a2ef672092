use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use super::circuit::{Circuit, Gate, Param};
use super::state::{expectation, simulate, Observable, StateVector};
use super::{QsimError, Result};

/// Exact gradient of `⟨observable⟩` with respect to each free parameter, in
/// `free_parameters` order, evaluated at `values`.
///
/// RX/RY/RZ/ZZ generators have eigenvalues ±1/2 and use the two-term rule
/// `[f(θ+π/2) − f(θ−π/2)] / 2`. CRX has generator eigenvalues {0, ±1/2}
/// and needs the four-term rule with shifts ±π/2 and ±3π/2. Parameters that
/// appear in several gates are shifted one occurrence at a time and summed.
pub fn parameter_shift_gradient(
    circuit: &Circuit,
    observable: &Observable,
    values: &[f64],
    initial: Option<&StateVector>,
) -> Result<Vec<f64>> {
    let bound = circuit.bind_slice(values)?;
    // Reject non-scalar observables before doing any work.
    expectation(&StateVector::zero(circuit.n_qubits())?, observable)?;

    let eval_shifted = |gate_index: usize, shift: f64| -> Result<f64> {
        let mut shifted = bound.clone();
        shifted.shift_gate(gate_index, shift);
        expectation(&simulate(&shifted, initial)?, observable)
    };

    let mut grad = vec![0.0; values.len()];
    for (gate_index, gate) in circuit.gates().iter().enumerate() {
        let Some(Param::Free(name)) = gate.param() else {
            continue;
        };
        let slot = circuit
            .free_parameters()
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| QsimError::UnknownParameter(name.clone()))?;
        let d = match gate {
            Gate::Crx { .. } => {
                let c1 = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
                let c2 = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
                c1 * (eval_shifted(gate_index, FRAC_PI_2)? - eval_shifted(gate_index, -FRAC_PI_2)?)
                    - c2 * (eval_shifted(gate_index, 1.5 * PI)?
                        - eval_shifted(gate_index, -1.5 * PI)?)
            }
            _ => 0.5 * (eval_shifted(gate_index, FRAC_PI_2)? - eval_shifted(gate_index, -FRAC_PI_2)?),
        };
        grad[slot] += d;
    }
    Ok(grad)
}

impl Circuit {
    fn shift_gate(&mut self, index: usize, shift: f64) {
        if let Some(Param::Bound(v)) = self.gate_param_mut(index) {
            *v += shift;
        }
    }
}
