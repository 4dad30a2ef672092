//! Acceptance criteria for the workspace. Each function runs one criterion
//! and reports whether it held together with the measured values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use qbridge_cli::selftest;
use qbridge_core::corpus::{load_manifest, KindRules, Manifest, Paradigm, SeedKind, Source};
use qbridge_core::evalbench::{evaluate_model, make_dataset, DatasetKind, EvalReport};
use qbridge_core::scaler::SamplingWeights;
use qbridge_core::stats::default_family;
use qbridge_core::train::{MlpModel, QmlModel, QmlModelSpec, QmlTask, Targets};

/// Seed used by every randomized criterion.
pub const SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

/// A numbered criterion with a short title.
pub struct Criterion {
    pub number: usize,
    pub title: &'static str,
    pub run: fn() -> Outcome,
}

pub const CRITERIA: [Criterion; 14] = [
    Criterion { number: 1, title: "simulator matches dense-matrix oracle", run: simulator_oracle },
    Criterion { number: 2, title: "ZZ feature map on the zero vector gives |+>^n", run: feature_map_zero },
    Criterion { number: 3, title: "RealAmplitudes states are real", run: real_amplitudes },
    Criterion { number: 4, title: "parameter shift matches finite differences", run: parameter_shift },
    Criterion { number: 5, title: "COBYLA converges on the sphere", run: optimizer },
    Criterion { number: 6, title: "QML regression band on iris", run: qml_regression_band },
    Criterion { number: 7, title: "MLP regression band on iris", run: mlp_regression_band },
    Criterion { number: 8, title: "QML classification sanity band", run: classification_band },
    Criterion { number: 9, title: "metric identities", run: metric_identities },
    Criterion { number: 10, title: "contract round trip and template instance", run: contract_parser },
    Criterion { number: 11, title: "syntax gate curated suite", run: syntax_gate },
    Criterion { number: 12, title: "reference-count sampling weights", run: sampling_weights },
    Criterion { number: 13, title: "offline pipeline end to end", run: offline_pipeline },
    Criterion { number: 14, title: "paradigm legality", run: paradigm_legality },
];

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

pub fn simulator_oracle() -> Outcome {
    let (e, t) = timed(|| selftest::simulator_oracle_error(200, SEED));
    Outcome::new(
        e < 1e-10 && t < Duration::from_secs(10),
        format!("max error {e:.2e} (< 1e-10), {:.2}s (< 10s)", t.as_secs_f64()),
    )
}

pub fn feature_map_zero() -> Outcome {
    let e = selftest::feature_map_zero_error();
    Outcome::new(e < 1e-12, format!("max distance {e:.3e} (< 1e-12)"))
}

pub fn real_amplitudes() -> Outcome {
    let e = selftest::real_amplitudes_max_imag(100, SEED);
    Outcome::new(e < 1e-12, format!("max |imag| {e:.2e} (< 1e-12)"))
}

pub fn parameter_shift() -> Outcome {
    let e = selftest::parameter_shift_error(50, SEED);
    Outcome::new(e < 1e-6, format!("max gap {e:.2e} (< 1e-6)"))
}

pub fn optimizer() -> Outcome {
    let runs = selftest::optimizer_sphere(2..=6);
    let passed = runs
        .iter()
        .all(|r| r.best_objective < 1e-6 && r.evaluations <= 1000 && r.monotone);
    let detail = runs
        .iter()
        .map(|r| {
            format!(
                "dim {}: {:.1e} in {} evals{}",
                r.dim,
                r.best_objective,
                r.evaluations,
                if r.monotone { "" } else { " (trace increased)" }
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(passed, detail)
}

fn mean_of(report: &EvalReport, metric: &str) -> f64 {
    report.metric(metric).map_or(f64::NAN, |m| m.mean)
}

pub fn qml_regression_band() -> Outcome {
    let dataset = make_dataset(DatasetKind::IrisRegression3f, 0).expect("bundled dataset");
    let model = QmlModel::new(QmlModelSpec::new(dataset.n_features(), 3, QmlTask::Regression));
    let (report, t) = timed(|| evaluate_model(&model, &dataset, 5, 0));
    let report = match report {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("evaluation failed: {e}")),
    };
    let mse = mean_of(&report, "mse");
    let residual = report.residual_mean.unwrap_or(f64::NAN);
    Outcome::new(
        (0.8..=1.5).contains(&mse)
            && residual.abs() <= 0.05
            && report.failures.is_empty()
            && t < Duration::from_secs(300),
        format!(
            "avg MSE {mse:.4} (in [0.8, 1.5]), residual mean {residual:+.4} (|.| <= 0.05), {:.1}s (< 300s)",
            t.as_secs_f64()
        ),
    )
}

pub fn mlp_regression_band() -> Outcome {
    let dataset = make_dataset(DatasetKind::IrisRegression3f, 0).expect("bundled dataset");
    let model = MlpModel::new(vec![64, 32], false);
    let (report, t) = timed(|| evaluate_model(&model, &dataset, 5, 0));
    let report = match report {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("evaluation failed: {e}")),
    };
    let mse = mean_of(&report, "mse");
    Outcome::new(
        (0.7..=1.0).contains(&mse) && report.failures.is_empty() && t < Duration::from_secs(60),
        format!("avg MSE {mse:.4} (in [0.7, 1.0]), {:.1}s (< 60s)", t.as_secs_f64()),
    )
}

pub fn classification_band() -> Outcome {
    let kind = DatasetKind::SyntheticClassification {
        features: 2,
        classes: 3,
    };
    let dataset = make_dataset(kind, 7).expect("synthetic dataset");
    let model = QmlModel::new(QmlModelSpec::new(2, 2, QmlTask::Classification { n_classes: 3 }));
    let report = match evaluate_model(&model, &dataset, 5, 7) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("evaluation failed: {e}")),
    };
    let accuracy = mean_of(&report, "accuracy");
    let f1 = mean_of(&report, "f1_macro");
    let Targets::Labels { labels, n_classes } = &dataset.y else {
        return Outcome::new(false, "dataset is not labelled");
    };
    let mut support = vec![0usize; *n_classes];
    for &l in labels {
        support[l] += 1;
    }
    let rows: Vec<usize> = report
        .confusion
        .as_ref()
        .map(|c| c.iter().map(|row| row.iter().sum()).collect())
        .unwrap_or_default();
    Outcome::new(
        accuracy >= 0.30 && (f1 - accuracy).abs() <= 0.15 && rows == support,
        format!(
            "accuracy {accuracy:.4} (>= 0.30), f1_macro {f1:.4} (gap {:.4} <= 0.15), confusion rows {rows:?} vs supports {support:?}",
            (f1 - accuracy).abs()
        ),
    )
}

pub fn metric_identities() -> Outcome {
    let e = selftest::metric_identity_error(1000, SEED);
    Outcome::new(e < 1e-12, format!("max violation {e:.2e} (< 1e-12)"))
}

pub fn contract_parser() -> Outcome {
    let equal = selftest::contract_round_trip(1000, SEED);
    let template = selftest::template_instance_parses();
    Outcome::new(
        equal == 1000 && template,
        format!("{equal}/1000 round trips equal, template instance parses: {template}"),
    )
}

pub fn syntax_gate() -> Outcome {
    let s = selftest::syntax_suite_score();
    Outcome::new(
        s.snippets == 50 && s.mutants == 50 && s.accepted == s.snippets && s.rejected == s.mutants,
        format!(
            "{}/{} snippets accepted, {}/{} mutants rejected",
            s.accepted, s.snippets, s.rejected, s.mutants
        ),
    )
}

pub fn sampling_weights() -> Outcome {
    let (freq, weights) = selftest::sampling_frequencies(&SamplingWeights::default(), 100_000, SEED);
    let dev = freq
        .iter()
        .zip(&weights)
        .map(|(f, w)| (f - w).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        dev <= 0.02,
        format!("frequencies {freq:.4?} vs weights {weights:.4?}, max deviation {dev:.4} (<= 0.02)"),
    )
}

/// Demo seed tree shipped with the CLI tests.
pub fn fixture_seeds() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures/seeds")
}

/// Runs `ingest`, `scale --mock -n 20`, `validate`, `stats` and
/// `export-sft` in `out` and returns the final manifest.
pub fn run_pipeline(out: &Path) -> Result<Manifest, String> {
    let seeds = fixture_seeds();
    let base = [
        "qbridge".to_string(),
        "--seed-root".into(),
        seeds.display().to_string(),
        "--out-dir".into(),
        out.display().to_string(),
        "--seed".into(),
        SEED.to_string(),
    ];
    let steps: [&[&str]; 5] = [&["ingest"], &["scale", "--mock", "-n", "20"], &["validate"], &["stats"], &["export-sft"]];
    for step in steps {
        let args = base.iter().cloned().chain(step.iter().map(|s| s.to_string()));
        let code = qbridge_cli::run_with_env(args, |_| None);
        if code != 0 {
            return Err(format!("`{}` exited with {code}", step.join(" ")));
        }
    }
    load_manifest(&out.join("manifest.jsonl")).map_err(|e| e.to_string())
}

/// Differences between the written stats and a direct recount of `manifest`.
fn stats_mismatches(manifest: &Manifest, stats: &serde_json::Value) -> Vec<String> {
    let mut expected: BTreeMap<String, [usize; 8]> = BTreeMap::new();
    for p in manifest.pairs().iter().filter(|p| p.source == Source::Scaled) {
        for key in [default_family(&p.relative_path), "total".to_string()] {
            let row = expected.entry(key).or_default();
            row[usize::from(p.reference_count) - 1] += 1;
            match p.paradigm {
                Some(Paradigm::Extension) => row[4] += 1,
                Some(Paradigm::ControlledModification) => row[5] += 1,
                Some(Paradigm::Combination) => row[6] += 1,
                None => {}
            }
            row[7] += 1;
        }
    }
    let table = &stats["paradigm_table"];
    let mut actual: BTreeMap<String, [usize; 8]> = BTreeMap::new();
    let rows = table["rows"].as_array().cloned().unwrap_or_default();
    for row in rows.iter().chain(std::iter::once(&table["totals"])) {
        let n = |v: &serde_json::Value| v.as_u64().unwrap_or(u64::MAX) as usize;
        let refs = &row["ref_counts"];
        actual.insert(
            row["family"].as_str().unwrap_or("?").to_string(),
            [
                n(&refs[0]),
                n(&refs[1]),
                n(&refs[2]),
                n(&refs[3]),
                n(&row["extension_count"]),
                n(&row["controlled_modification_count"]),
                n(&row["combination_count"]),
                n(&row["total"]),
            ],
        );
    }
    let mut out = Vec::new();
    for key in expected.keys().chain(actual.keys()) {
        if expected.get(key) != actual.get(key) {
            out.push(format!("{key}: expected {:?}, found {:?}", expected.get(key), actual.get(key)));
        }
    }
    out.dedup();

    let scaled = manifest.pairs().iter().filter(|p| p.source == Source::Scaled).count();
    let histogram = &stats["histogram"]["series"];
    for side in ["cml", "qml"] {
        let counted: u64 = histogram[side]
            .as_array()
            .map_or(0, |c| c.iter().filter_map(|v| v.as_u64()).sum());
        if counted as usize != scaled {
            out.push(format!("histogram {side} holds {counted} pairs, expected {scaled}"));
        }
    }
    out
}

pub fn offline_pipeline() -> Outcome {
    let dir = tempfile::tempdir().expect("temporary directory");
    let (manifest, t) = timed(|| run_pipeline(dir.path()));
    let manifest = match manifest {
        Ok(m) => m,
        Err(e) => return Outcome::new(false, e),
    };
    let scaled: Vec<_> = manifest.pairs().iter().filter(|p| p.source == Source::Scaled).collect();
    let valid = scaled.iter().filter(|p| p.syntax_valid).count();
    let stats: serde_json::Value = std::fs::read_to_string(dir.path().join("stats.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or_default();
    let mismatches = stats_mismatches(&manifest, &stats);
    let sft = std::fs::read_to_string(dir.path().join("sft.jsonl")).unwrap_or_default();
    let heading = sft.lines().count() > 0 && sft.lines().all(|l| l.contains("QML Solution:"));
    Outcome::new(
        scaled.len() == 20 && valid == 20 && mismatches.is_empty() && heading && t < Duration::from_secs(30),
        format!(
            "{} appended, {valid} syntax-valid, stats recount {}, {} SFT records with heading: {heading}, {:.2}s (< 30s)",
            scaled.len(),
            if mismatches.is_empty() {
                "matches".to_string()
            } else {
                mismatches.join("; ")
            },
            sft.lines().count(),
            t.as_secs_f64()
        ),
    )
}

/// Scaled pairs that break the paradigm rules, by relative path.
pub fn paradigm_violations(manifest: &Manifest) -> Vec<String> {
    let rules = KindRules::default();
    let kind_by_path: BTreeMap<&str, SeedKind> = manifest
        .pairs()
        .iter()
        .map(|p| (p.relative_path.as_str(), rules.kind_of(&p.relative_path)))
        .collect();
    manifest
        .pairs()
        .iter()
        .filter(|p| p.source == Source::Scaled)
        .filter(|p| match p.references.as_slice() {
            [] => true,
            [single] => match kind_by_path.get(single.as_str()) {
                Some(SeedKind::MlQmlPair) => p.paradigm != Some(Paradigm::Extension),
                Some(_) => p.paradigm == Some(Paradigm::Combination),
                None => true,
            },
            _ => p.paradigm != Some(Paradigm::Combination),
        })
        .map(|p| p.relative_path.clone())
        .collect()
}

pub fn paradigm_legality() -> Outcome {
    let dir = tempfile::tempdir().expect("temporary directory");
    let manifest = match run_pipeline(dir.path()) {
        Ok(m) => m,
        Err(e) => return Outcome::new(false, e),
    };
    let scaled: Vec<_> = manifest.pairs().iter().filter(|p| p.source == Source::Scaled).collect();
    let multi = scaled.iter().filter(|p| p.references.len() >= 2).count();
    let violations = paradigm_violations(&manifest);
    Outcome::new(
        violations.is_empty() && !scaled.is_empty(),
        format!(
            "{} scaled pairs ({multi} multi-reference), violations: {violations:?}",
            scaled.len()
        ),
    )
}
