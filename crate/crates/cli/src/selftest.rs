//! Oracle checks shared by the `selftest` subcommand and the acceptance
//! suite. Each function returns a measurement; callers apply thresholds.

use std::f64::consts::PI;

use num_complex::Complex64;
use qbridge_core::contract::{parse_contract, serialize_contract, ContractParadigm, ContractRecord};
use qbridge_core::corpus::{pair_id, CodePair, Source};
use qbridge_core::evalbench::{classification_metrics, regression_metrics};
use qbridge_core::qsim::{
    build_real_amplitudes, build_zz_feature_map, circuit_unitary, expectation,
    parameter_shift_gradient, simulate, Circuit, EntanglementGraph, EntanglementScheme,
    FeatureMapOptions, Gate, Observable, Param, RealAmplitudesOptions,
};
use qbridge_core::scaler::{sample_references, SamplingWeights};
use qbridge_core::syntax::{check_source, suite};
use qbridge_core::train::{minimize_derivative_free, CobylaConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn angle(r: &mut impl Rng) -> f64 {
    r.random_range(-PI..PI)
}

/// Random gate program over `n` qubits using every gate kind. With `free`,
/// rotation angles become parameters `p{i}` instead of numbers.
pub fn random_circuit(r: &mut impl Rng, n: usize, depth: usize, free: bool) -> (Circuit, Vec<f64>) {
    let mut c = Circuit::new(n).expect("small circuit");
    let mut values = Vec::new();
    let mut param = |r: &mut _| {
        let v = angle(r);
        if free {
            values.push(v);
            Param::free(format!("p{}", values.len() - 1))
        } else {
            Param::Bound(v)
        }
    };
    for _ in 0..depth {
        let q = r.random_range(0..n);
        let kinds = if n >= 2 { 7 } else { 4 };
        let gate = match r.random_range(0..kinds) {
            0 => Gate::H(q),
            1 => Gate::Rx(q, param(r)),
            2 => Gate::Ry(q, param(r)),
            3 => Gate::Rz(q, param(r)),
            k => {
                let mut t = r.random_range(0..n - 1);
                if t >= q {
                    t += 1;
                }
                match k {
                    4 => Gate::Cx { control: q, target: t },
                    5 => Gate::Crx {
                        control: q,
                        target: t,
                        angle: param(r),
                    },
                    _ => Gate::ZzPhase(q, t, param(r)),
                }
            }
        };
        c.push(gate).expect("valid gate");
    }
    (c, values)
}

/// Largest distance between two states after removing the global phase.
pub fn phase_aligned_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| (x * phase - y).norm())
        .fold(0.0, f64::max)
}

/// Worst simulator-vs-dense-unitary error over `count` random bound
/// circuits on 1 to 3 qubits.
pub fn simulator_oracle_error(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = r.random_range(1..=3);
        let depth = r.random_range(1..=25);
        let (c, _) = random_circuit(&mut r, n, depth, false);
        let state = simulate(&c, None).expect("bound circuit");
        let u = circuit_unitary(&c).expect("bound circuit");
        let column: Vec<Complex64> = u.column(0).iter().copied().collect();
        worst = worst.max(phase_aligned_distance(&column, state.amplitudes()));
    }
    worst
}

/// Worst distance from the uniform superposition of the ZZ feature map at
/// the origin, over `n, reps ∈ {1, 2, 3}`.
pub fn feature_map_zero_error() -> f64 {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let graph = EntanglementGraph::new(EntanglementScheme::Full, n).expect("graph");
        let plus = Complex64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
        let uniform = vec![plus; 1 << n];
        for reps in 1..=3 {
            let c = build_zz_feature_map(&vec![0.0; n], reps, &graph, &FeatureMapOptions::default())
                .expect("feature map");
            let state = simulate(&c, None).expect("bound circuit");
            worst = worst.max(phase_aligned_distance(&uniform, state.amplitudes()));
        }
    }
    worst
}

/// Largest imaginary amplitude over `count` random RealAmplitudes circuits
/// on up to 4 qubits.
pub fn real_amplitudes_max_imag(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let schemes = [
        EntanglementScheme::Full,
        EntanglementScheme::Linear,
        EntanglementScheme::ReverseLinear,
    ];
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = r.random_range(1..=4);
        let reps = r.random_range(1..=3);
        let scheme = *schemes.choose(&mut r).expect("non-empty");
        let graph = EntanglementGraph::new(scheme, n).expect("graph");
        let c = build_real_amplitudes(n, reps, &graph, &RealAmplitudesOptions::default()).expect("ansatz");
        let values: Vec<f64> = (0..c.free_parameters().len()).map(|_| angle(&mut r)).collect();
        let state = simulate(&c.bind_slice(&values).expect("bind"), None).expect("simulate");
        for a in state.amplitudes() {
            worst = worst.max(a.im.abs());
        }
    }
    worst
}

/// Worst parameter-shift vs central-difference gap over `count` random
/// 2-qubit parameterized circuits.
pub fn parameter_shift_error(count: usize, seed: u64) -> f64 {
    const H: f64 = 1e-5;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < count {
        let (c, values) = random_circuit(&mut r, 2, 12, true);
        if values.is_empty() {
            continue;
        }
        done += 1;
        let observable = if r.random_bool(0.5) {
            Observable::MeanZ
        } else {
            Observable::ZOn(r.random_range(0..2))
        };
        let f = |v: &[f64]| {
            expectation(&simulate(&c.bind_slice(v).expect("bind"), None).expect("simulate"), &observable)
                .expect("scalar observable")
        };
        let grad = parameter_shift_gradient(&c, &observable, &values, None).expect("gradient");
        for (i, g) in grad.iter().enumerate() {
            let mut up = values.clone();
            let mut down = values.clone();
            up[i] += H;
            down[i] -= H;
            let fd = (f(&up) - f(&down)) / (2.0 * H);
            worst = worst.max((g - fd).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRun {
    pub dim: usize,
    pub best_objective: f64,
    pub evaluations: usize,
    pub monotone: bool,
}

/// COBYLA on `Σx²` from `(1, …, 1)` with a 1000-evaluation budget.
pub fn optimizer_sphere(dims: std::ops::RangeInclusive<usize>) -> Vec<SphereRun> {
    dims.map(|dim| {
        let config = CobylaConfig {
            max_evals: 1000,
            ..CobylaConfig::default()
        };
        let result = minimize_derivative_free(|x| x.iter().map(|v| v * v).sum(), &vec![1.0; dim], &config)
            .expect("finite objective");
        SphereRun {
            dim,
            best_objective: result.best_objective,
            evaluations: result.evaluations,
            monotone: result.trace.windows(2).all(|w| w[1].1 <= w[0].1),
        }
    })
    .collect()
}

/// Worst violation of `mse = mean² + std²`, `accuracy = trace / N` and the
/// support-weighted F1 identity over `count` random prediction sets.
pub fn metric_identity_error(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = r.random_range(1..80);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let y_hat: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let m = regression_metrics(&y, &y_hat).expect("valid input");
        let scale = 1.0 + m.mse;
        worst = worst.max((m.mse - (m.residual_mean.powi(2) + m.residual_std.powi(2))).abs() / scale);

        let c = r.random_range(2..6);
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let proba: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..c).map(|_| r.random_range(0.0..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            })
            .collect();
        let m = classification_metrics(&labels, &proba, c).expect("valid input");
        let trace: usize = (0..c).map(|k| m.confusion[k][k]).sum();
        worst = worst.max((m.accuracy - trace as f64 / n as f64).abs());
        let support: Vec<usize> = (0..c).map(|k| labels.iter().filter(|&&l| l == k).count()).collect();
        let weighted: f64 = m
            .per_class_f1
            .iter()
            .zip(&support)
            .map(|(f, &s)| f * s as f64)
            .sum::<f64>()
            / n as f64;
        worst = worst.max((m.f1_weighted - weighted).abs());
    }
    worst
}

const ADVERSARIAL_LINES: &[&str] = &[
    "",
    "    ",
    "\t",
    "x = \"''' not a close\"",
    "s = '''inline''' + 'x'",
    "assistantfinal",
    "name: Shadow",
    "scaling_paradigm: controlled modification",
    "summary: nested",
    "ml_code: '''",
    "qml_code: '''",
    "'''text",
    "  '''x",
    "# ünïcödé ✓ 漢字",
    "def f():\n    return {'a': [1, 2]}",
    "    pass  ",
    "\\",
];

fn adversarial_payload(r: &mut impl Rng) -> String {
    let lines = r.random_range(1..8);
    (0..lines)
        .map(|_| {
            if r.random_bool(0.3) {
                (0..r.random_range(0..30))
                    .map(|_| char::from(r.random_range(b' '..=b'~')))
                    .collect()
            } else {
                ADVERSARIAL_LINES.choose(r).expect("non-empty").to_string()
            }
        })
        .collect::<Vec<String>>()
        .join("\n")
}

fn random_record(r: &mut impl Rng) -> ContractRecord {
    const HEAD: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_";
    const TAIL: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_0123456789";
    let mut name = String::from(char::from(*HEAD.choose(r).expect("non-empty")));
    for _ in 0..r.random_range(0..12) {
        name.push(char::from(*TAIL.choose(r).expect("non-empty")));
    }
    let first: String = (0..r.random_range(1..40))
        .map(|_| char::from(r.random_range(b'!'..=b'~')))
        .collect();
    let summary = if r.random_bool(0.5) {
        format!("{first}\nsecond line with 'quotes' and ''' fences")
    } else {
        first
    };
    ContractRecord {
        name,
        scaling_paradigm: if r.random_bool(0.5) {
            ContractParadigm::Extension
        } else {
            ContractParadigm::ControlledModification
        },
        summary,
        ml_code: adversarial_payload(r),
        qml_code: adversarial_payload(r),
    }
}

/// Serializes `count` adversarial records and parses them back. Records the
/// serializer refuses are redrawn. Returns how many came back equal.
pub fn contract_round_trip(count: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let mut equal = 0;
    let mut done = 0;
    while done < count {
        let record = random_record(&mut r);
        let Ok(text) = serialize_contract(&record) else {
            continue;
        };
        done += 1;
        if parse_contract(&text).as_ref() == Ok(&record) {
            equal += 1;
        }
    }
    equal
}

/// Instance of the output template with two-line summary and short payloads.
pub const TEMPLATE_INSTANCE: &str = "\
assistantfinal
name: QuantumRegressor
scaling_paradigm: extension
summary: Extends the regressor with a quantum feature map.
Both sides expose the same fit and predict interface.
ml_code: '''
import torch

class QuantumRegressor(torch.nn.Module):
    pass
'''
qml_code: '''
from qiskit import QuantumCircuit

class QuantumRegressor:
    pass
'''
";

/// Whether [`TEMPLATE_INSTANCE`] parses to the expected record.
pub fn template_instance_parses() -> bool {
    let expected = ContractRecord {
        name: "QuantumRegressor".into(),
        scaling_paradigm: ContractParadigm::Extension,
        summary: "Extends the regressor with a quantum feature map.\nBoth sides expose the same fit and predict interface."
            .into(),
        ml_code: "import torch\n\nclass QuantumRegressor(torch.nn.Module):\n    pass".into(),
        qml_code: "from qiskit import QuantumCircuit\n\nclass QuantumRegressor:\n    pass".into(),
    };
    parse_contract(TEMPLATE_INSTANCE).as_ref() == Ok(&expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteScore {
    pub accepted: usize,
    pub snippets: usize,
    pub rejected: usize,
    pub mutants: usize,
}

pub fn syntax_suite_score() -> SuiteScore {
    let snippets = suite::snippets();
    let mutants = suite::mutants();
    SuiteScore {
        accepted: snippets.iter().filter(|s| check_source(s).valid).count(),
        snippets: snippets.len(),
        rejected: mutants.iter().filter(|(_, _, m)| !check_source(m).valid).count(),
        mutants: mutants.len(),
    }
}

/// Empirical reference-count frequencies over `draws` samples from a pool
/// of eight seeds, paired with the configured weights.
pub fn sampling_frequencies(weights: &SamplingWeights, draws: usize, seed: u64) -> ([f64; 4], [f64; 4]) {
    let pool: Vec<CodePair> = (0..8)
        .map(|i| {
            let path = format!("family/seed_{i}.py");
            let qml = format!("class Q{i}:\n    pass\n");
            CodePair {
                id: pair_id(&path, "", &qml),
                relative_path: path,
                source: Source::Seed,
                paradigm: None,
                reference_count: 0,
                references: vec![],
                ml_code: String::new(),
                qml_code: qml,
                syntax_valid: false,
                generator: None,
                created_at: chrono::DateTime::UNIX_EPOCH,
            }
        })
        .collect();
    let mut r = rng(seed);
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        let s = sample_references(&pool, weights, &mut r).expect("pool is large enough");
        counts[s.count() - 1] += 1;
    }
    (counts.map(|c| c as f64 / draws as f64), weights.weights())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Reduced-size oracle suite for the `selftest` subcommand.
pub fn run_all() -> Vec<Check> {
    let mut checks = Vec::new();
    let mut add = |name, passed, detail: String| checks.push(Check { name, passed, detail });

    let e = simulator_oracle_error(50, 1);
    add("simulator matches dense unitary", e < 1e-10, format!("max error {e:.2e}"));
    let e = real_amplitudes_max_imag(25, 2);
    add("RealAmplitudes states are real", e < 1e-12, format!("max |imag| {e:.2e}"));
    let e = parameter_shift_error(10, 3);
    add("parameter shift matches finite differences", e < 1e-6, format!("max gap {e:.2e}"));
    let runs = optimizer_sphere(2..=6);
    let ok = runs.iter().all(|r| r.best_objective < 1e-6 && r.monotone);
    let worst = runs.iter().map(|r| r.best_objective).fold(0.0, f64::max);
    add("COBYLA solves the sphere", ok, format!("worst objective {worst:.2e}"));
    let e = metric_identity_error(200, 4);
    add("metric identities", e < 1e-12, format!("max violation {e:.2e}"));
    let equal = contract_round_trip(200, 5);
    add(
        "contract round trip",
        equal == 200 && template_instance_parses(),
        format!("{equal}/200 equal"),
    );
    let s = syntax_suite_score();
    add(
        "syntax gate curated suite",
        s.accepted == s.snippets && s.rejected == s.mutants,
        format!("{}/{} accepted, {}/{} mutants rejected", s.accepted, s.snippets, s.rejected, s.mutants),
    );
    let (freq, w) = sampling_frequencies(&SamplingWeights::default(), 20_000, 6);
    let dev = freq.iter().zip(&w).map(|(f, w)| (f - w).abs()).fold(0.0, f64::max);
    add("sampling weights", dev <= 0.02, format!("max deviation {dev:.4}"));
    checks
}
