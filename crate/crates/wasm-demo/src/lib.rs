//! Statevector operations exposed to the browser through wasm-bindgen.
//!
//! The plain functions return Rust values and are what the tests exercise;
//! the `#[wasm_bindgen]` wrappers serialize them to JSON for the page.

use qbridge_core::qsim::{
    build_real_amplitudes, build_zz_feature_map, expectation, parameter_shift_gradient, simulate,
    Circuit, EntanglementGraph, EntanglementScheme, FeatureMapOptions, Observable, RealAmplitudesOptions,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest register the page will simulate.
pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodedState {
    pub probabilities: Vec<f64>,
    /// `[re, im]` per basis state, qubit 0 as the least significant bit.
    pub amplitudes: Vec<[f64; 2]>,
    pub circuit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzReadout {
    pub probabilities: Vec<f64>,
    /// `⟨Z_q⟩` for each qubit.
    pub z: Vec<f64>,
    pub mean_z: f64,
    /// Parameter-shift gradient of `mean_z` with respect to `thetas`.
    pub gradient: Vec<f64>,
}

fn graph(n: usize, scheme: &str) -> Result<EntanglementGraph, String> {
    if n == 0 || n > MAX_QUBITS {
        return Err(format!("need between 1 and {MAX_QUBITS} features, got {n}"));
    }
    let scheme: EntanglementScheme = scheme.parse().map_err(|e: qbridge_core::qsim::QsimError| e.to_string())?;
    if scheme == EntanglementScheme::Custom {
        return Err("custom entanglement needs an edge list".into());
    }
    EntanglementGraph::new(scheme, n).map_err(|e| e.to_string())
}

fn feature_map(x: &[f64], reps: usize, scheme: &str) -> Result<(Circuit, EntanglementGraph), String> {
    let g = graph(x.len(), scheme)?;
    let c = build_zz_feature_map(x, reps, &g, &FeatureMapOptions::default()).map_err(|e| e.to_string())?;
    Ok((c, g))
}

/// Number of ansatz angles for `n` qubits and `reps` rounds.
pub fn ansatz_parameter_count(n: usize, reps: usize) -> usize {
    n * (reps + 1)
}

/// State prepared by the ZZ feature map on `x`.
pub fn encode(x: &[f64], reps: usize, scheme: &str) -> Result<EncodedState, String> {
    let (circuit, _) = feature_map(x, reps, scheme)?;
    let state = simulate(&circuit, None).map_err(|e| e.to_string())?;
    Ok(EncodedState {
        probabilities: state.probabilities(),
        amplitudes: state.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
        circuit: circuit.dump(),
    })
}

/// Feature map on `x` followed by RealAmplitudes bound to `thetas`, read
/// out in the Z basis.
pub fn ansatz_readout(x: &[f64], thetas: &[f64], reps: usize, scheme: &str) -> Result<AnsatzReadout, String> {
    let (mut circuit, g) = feature_map(x, reps, scheme)?;
    let ansatz = build_real_amplitudes(x.len(), reps, &g, &RealAmplitudesOptions::default())
        .map_err(|e| e.to_string())?;
    let expected = ansatz.free_parameters().len();
    if thetas.len() != expected {
        return Err(format!("expected {expected} angles, got {}", thetas.len()));
    }
    circuit.compose(&ansatz).map_err(|e| e.to_string())?;
    let state = simulate(&circuit.bind_slice(thetas).map_err(|e| e.to_string())?, None).map_err(|e| e.to_string())?;
    let z = (0..x.len())
        .map(|q| expectation(&state, &Observable::ZOn(q)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mean_z = expectation(&state, &Observable::MeanZ).map_err(|e| e.to_string())?;
    let gradient = parameter_shift_gradient(&circuit, &Observable::MeanZ, thetas, None).map_err(|e| e.to_string())?;
    Ok(AnsatzReadout {
        probabilities: state.probabilities(),
        z,
        mean_z,
        gradient,
    })
}

fn to_json<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = ansatzParameterCount)]
pub fn ansatz_parameter_count_js(n: usize, reps: usize) -> usize {
    ansatz_parameter_count(n, reps)
}

/// JSON-encoded [`EncodedState`].
#[wasm_bindgen(js_name = encodeFeatures)]
pub fn encode_js(x: Vec<f64>, reps: usize, entanglement: &str) -> Result<String, JsError> {
    to_json(encode(&x, reps, entanglement))
}

/// JSON-encoded [`AnsatzReadout`].
#[wasm_bindgen(js_name = ansatzReadout)]
pub fn ansatz_readout_js(x: Vec<f64>, thetas: Vec<f64>, reps: usize, entanglement: &str) -> Result<String, JsError> {
    to_json(ansatz_readout(&x, &thetas, reps, entanglement))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qubit_zero_input_is_plus_state() {
        let s = encode(&[0.0], 2, "linear").unwrap();
        assert!((s.probabilities[0] - 0.5).abs() < 1e-15);
        assert!((s.probabilities[1] - 0.5).abs() < 1e-15);
        assert_eq!(s.circuit.lines().count(), 3);
    }

    #[test]
    fn encoded_probabilities_are_normalized() {
        let s = encode(&[0.3, -1.2, 2.0], 2, "full").unwrap();
        assert_eq!(s.amplitudes.len(), 8);
        assert!((s.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn readout_gradient_matches_finite_differences() {
        let x = [0.4, -0.7];
        let thetas: Vec<f64> = (0..ansatz_parameter_count(2, 1)).map(|i| 0.3 * i as f64 - 0.5).collect();
        let r = ansatz_readout(&x, &thetas, 1, "linear").unwrap();
        assert!((r.z.iter().sum::<f64>() / 2.0 - r.mean_z).abs() < 1e-12);
        let h = 1e-5;
        for i in 0..thetas.len() {
            let mut up = thetas.clone();
            up[i] += h;
            let mut down = thetas.clone();
            down[i] -= h;
            let fd = (ansatz_readout(&x, &up, 1, "linear").unwrap().mean_z
                - ansatz_readout(&x, &down, 1, "linear").unwrap().mean_z)
                / (2.0 * h);
            assert!((fd - r.gradient[i]).abs() < 1e-6, "{i}: {fd} vs {}", r.gradient[i]);
        }
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(encode(&[], 1, "linear").is_err());
        assert!(encode(&[0.0; 11], 1, "linear").is_err());
        assert!(encode(&[0.0, 1.0], 1, "ring").is_err());
        assert!(encode(&[0.0, 1.0], 1, "custom").is_err());
        assert!(ansatz_readout(&[0.0, 1.0], &[0.0; 3], 1, "linear").is_err());
    }

    #[test]
    fn json_shape() {
        let s = encode(&[0.1, 0.2], 1, "linear").unwrap();
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["amplitudes"].as_array().unwrap().len(), 4);
        assert!(v["circuit"].as_str().unwrap().starts_with('H'));
    }
}
