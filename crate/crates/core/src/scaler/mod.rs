//! Scaling campaigns: reference sampling, paradigm assignment, prompt
//! assembly and generation against a completion endpoint.

mod campaign;
mod client;

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CodePair, Manifest, Paradigm, SeedKind, Source};

pub use campaign::{
    generate_one, plan_tasks, run_campaign, CampaignConfig, CampaignOutcome, CampaignReport,
    Rejection,
};
#[cfg(feature = "http")]
pub use client::HttpClient;
pub use client::{
    builtin_responses, extract_content, ClientError, CompletionClient, CompletionRequest,
    EndpointConfig, MockClient, ENV_KEY, ENV_MODEL, ENV_URL,
};

const SCALING_PROMPT: &str = include_str!("../../data/scaling_prompt.txt");
const COMBINATION_SECTION: &str = include_str!("../../data/combination_expectations.txt");
const PARADIGM_SECTION_END: &str = "#Constraints\n";

/// Reference totals per count from the corpus overview table.
const DEFAULT_REFERENCE_TOTALS: [f64; 4] = [2699.0, 4968.0, 1800.0, 3828.0];

/// Minimum number of pool entries a campaign can sample from.
pub const MIN_POOL: usize = 4;

#[derive(Debug, Error)]
pub enum ScaleError {
    #[error("need at least {required} reference pairs, found {available}")]
    InsufficientSeeds { available: usize, required: usize },
    #[error("invalid sampling weights: {0}")]
    InvalidWeights(String),
    #[error("reference `{relative_path}` has no quantum code")]
    EmptyReferenceCode { relative_path: String },
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: usize },
    #[error("endpoint error: {0}")]
    Endpoint(String),
    #[error("contract violation after {attempts} attempts: {reason}")]
    ContractViolation { attempts: usize, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Probabilities of drawing 1, 2, 3 or 4 references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct SamplingWeights([f64; 4]);

impl SamplingWeights {
    pub fn new(w: [f64; 4]) -> Result<Self, ScaleError> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ScaleError::InvalidWeights(format!("{w:?} has a negative entry")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ScaleError::InvalidWeights(format!("{w:?} sums to {sum}")));
        }
        Ok(Self(w))
    }

    /// Normalizes non-negative tallies.
    pub fn from_counts(counts: [f64; 4]) -> Result<Self, ScaleError> {
        let sum: f64 = counts.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(ScaleError::InvalidWeights("counts sum to zero".into()));
        }
        Self::new(counts.map(|c| c / sum))
    }

    pub fn weights(&self) -> [f64; 4] {
        self.0
    }
}

impl Default for SamplingWeights {
    fn default() -> Self {
        Self::from_counts(DEFAULT_REFERENCE_TOTALS).expect("static totals are valid")
    }
}

impl TryFrom<[f64; 4]> for SamplingWeights {
    type Error = ScaleError;

    fn try_from(w: [f64; 4]) -> Result<Self, ScaleError> {
        Self::new(w)
    }
}

impl From<SamplingWeights> for [f64; 4] {
    fn from(w: SamplingWeights) -> Self {
        w.0
    }
}

/// References chosen for one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSelection {
    pub entries: Vec<CodePair>,
    /// Index into `entries`; set only when there are two or more.
    pub anchor: Option<usize>,
}

impl ReferenceSelection {
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    /// The anchor, or the only entry of a single-reference selection.
    pub fn anchor_entry(&self) -> &CodePair {
        &self.entries[self.anchor.unwrap_or(0)]
    }

    /// Entries with the anchor first, the rest in selection order.
    pub fn ordered(&self) -> Vec<&CodePair> {
        let a = self.anchor.unwrap_or(0);
        std::iter::once(&self.entries[a])
            .chain(self.entries.iter().enumerate().filter(|(i, _)| *i != a).map(|(_, e)| e))
            .collect()
    }
}

/// Pairs eligible as references: seeds with quantum code, optionally joined
/// by earlier scaled pairs.
pub fn reference_pool(manifest: &Manifest, include_scaled: bool) -> Vec<CodePair> {
    manifest
        .pairs()
        .iter()
        .filter(|p| !p.qml_code.is_empty())
        .filter(|p| p.source == Source::Seed || (include_scaled && p.syntax_valid))
        .cloned()
        .collect()
}

/// Draws a reference count from `weights`, that many distinct entries
/// uniformly from `pool`, and a uniform anchor when more than one.
pub fn sample_references<R: Rng + ?Sized>(
    pool: &[CodePair],
    weights: &SamplingWeights,
    rng: &mut R,
) -> Result<ReferenceSelection, ScaleError> {
    if pool.len() < MIN_POOL {
        return Err(ScaleError::InsufficientSeeds {
            available: pool.len(),
            required: MIN_POOL,
        });
    }
    let count = 1 + sample_count(weights, rng);
    let picks = rand::seq::index::sample(rng, pool.len(), count);
    let entries: Vec<CodePair> = picks.iter().map(|i| pool[i].clone()).collect();
    let anchor = (count >= 2).then(|| rng.random_range(0..count));
    Ok(ReferenceSelection { entries, anchor })
}

/// Zero-based category index drawn from `weights`.
fn sample_count<R: Rng + ?Sized>(weights: &SamplingWeights, rng: &mut R) -> usize {
    WeightedIndex::new(weights.0)
        .expect("validated weights have positive mass")
        .sample(rng)
}

/// Combination for multiple references, extension for a single classical/
/// quantum pair, and a fair coin between extension and controlled
/// modification for a single ansatz or feature map.
pub fn assign_paradigm<R: Rng + ?Sized>(
    selection: &ReferenceSelection,
    kind: SeedKind,
    rng: &mut R,
) -> Paradigm {
    if selection.count() >= 2 {
        return Paradigm::Combination;
    }
    match kind {
        SeedKind::MlQmlPair => Paradigm::Extension,
        SeedKind::Ansatz | SeedKind::FeatureMap => {
            if rng.random_bool(0.5) {
                Paradigm::Extension
            } else {
                Paradigm::ControlledModification
            }
        }
    }
}

/// One planned generation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTask {
    pub index: usize,
    pub selection: ReferenceSelection,
    pub paradigm: Paradigm,
    pub target_relative_path: String,
    pub temperature: f64,
    pub seed_kind: SeedKind,
}

/// `<anchor-stem>__scaled_<k>.py`.
pub fn target_path(anchor: &str, k: usize) -> String {
    let stem = anchor.strip_suffix(".py").unwrap_or(anchor);
    format!("{stem}__scaled_{k}.py")
}

/// Assembles the scaling prompt for `task`.
///
/// Single-reference tasks get the two-part template followed by the
/// `#TargetOutput` block and one `#ReferencePair[1]` block. Multi-reference
/// tasks also get the combination section and one block per reference,
/// anchor first.
pub fn build_prompt(task: &ScalingTask) -> Result<String, ScaleError> {
    let refs = task.selection.ordered();
    if let Some(empty) = refs.iter().find(|r| r.qml_code.is_empty()) {
        return Err(ScaleError::EmptyReferenceCode {
            relative_path: empty.relative_path.clone(),
        });
    }
    let mut out = String::with_capacity(SCALING_PROMPT.len() + 1024);
    if refs.len() >= 2 {
        let at = SCALING_PROMPT
            .find(PARADIGM_SECTION_END)
            .expect("template has a constraints section");
        out.push_str(&SCALING_PROMPT[..at]);
        out.push_str(COMBINATION_SECTION);
        out.push('\n');
        out.push_str(&SCALING_PROMPT[at..]);
    } else {
        out.push_str(SCALING_PROMPT);
    }
    out.push('\n');
    let _ = writeln!(out, "#TargetOutput");
    let _ = writeln!(out, "relative_path: {}", task.target_relative_path);
    let _ = writeln!(out, "anchor_reference: {}", refs[0].relative_path);
    let _ = writeln!(out, "reference_pair_count: {}", refs.len());
    for (k, r) in refs.iter().enumerate() {
        out.push('\n');
        let _ = writeln!(out, "#ReferencePair[{}]", k + 1);
        let _ = writeln!(out, "relative_path: {}", r.relative_path);
        let _ = writeln!(out, "ml_seed_path: seed_codebase/ML-Github/{}", r.relative_path);
        let _ = writeln!(out, "qml_seed_path: seed_codebase/QML-Github/{}", r.relative_path);
        for code in [&r.ml_code, &r.qml_code] {
            out.push('\n');
            out.push_str("```python\n");
            out.push_str(code);
            if !code.ends_with('\n') {
                out.push('\n');
            }
            out.push_str("```\n");
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::fixtures::seed_pair;
    use crate::rng;

    pub fn pool(n: usize) -> Vec<CodePair> {
        (0..n)
            .map(|i| {
                let dir = ["ansatz", "feature_map", "Autoencoder", "QCNN"][i % 4];
                seed_pair(
                    &format!("{dir}/seed_{i}.py"),
                    &format!("class Seed{i}:\n    pass\n"),
                    &format!("import qiskit\n\n\nclass Seed{i}:\n    depth = {i}\n"),
                )
            })
            .collect()
    }

    fn task(count: usize) -> ScalingTask {
        let entries = pool(count);
        ScalingTask {
            index: 0,
            selection: ReferenceSelection {
                entries,
                anchor: (count >= 2).then_some(count - 1),
            },
            paradigm: if count >= 2 {
                Paradigm::Combination
            } else {
                Paradigm::Extension
            },
            target_relative_path: "QCNN/seed_3__scaled_0.py".into(),
            temperature: 0.6,
            seed_kind: SeedKind::MlQmlPair,
        }
    }

    #[test]
    fn default_weights_normalize_reference_totals() {
        let w = SamplingWeights::default().weights();
        let expected = [0.2030, 0.3737, 0.1354, 0.2879];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 5e-5, "{a} vs {b}");
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_validation() {
        assert!(SamplingWeights::new([0.5, 0.5, 0.0, 0.0]).is_ok());
        assert!(SamplingWeights::new([0.5, 0.6, 0.0, -0.1]).is_err());
        assert!(SamplingWeights::new([0.5, 0.4, 0.0, 0.0]).is_err());
        let json = serde_json::to_string(&SamplingWeights::new([1.0, 0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        assert_eq!(json, "[1.0,0.0,0.0,0.0]");
        assert!(serde_json::from_str::<SamplingWeights>("[0.9,0.0,0.0,0.0]").is_err());
    }

    #[test]
    fn degenerate_weights_give_single_references() {
        let w = SamplingWeights::new([1.0, 0.0, 0.0, 0.0]).unwrap();
        let mut r = rng::seeded(1);
        for _ in 0..200 {
            let s = sample_references(&pool(6), &w, &mut r).unwrap();
            assert_eq!(s.count(), 1);
            assert_eq!(s.anchor, None);
        }
    }

    #[test]
    fn selections_are_distinct_and_anchored() {
        let p = pool(8);
        let mut r = rng::seeded(2);
        for _ in 0..500 {
            let s = sample_references(&p, &SamplingWeights::default(), &mut r).unwrap();
            let mut ids: Vec<_> = s.entries.iter().map(|e| e.id.clone()).collect();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), s.count());
            assert_eq!(s.anchor.is_some(), s.count() >= 2);
            assert!(s.anchor.is_none_or(|a| a < s.count()));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = pool(8);
        let a = sample_references(&p, &SamplingWeights::default(), &mut rng::seeded(9)).unwrap();
        let b = sample_references(&p, &SamplingWeights::default(), &mut rng::seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_pool_is_rejected() {
        let err = sample_references(&pool(3), &SamplingWeights::default(), &mut rng::seeded(0));
        assert!(matches!(
            err,
            Err(ScaleError::InsufficientSeeds {
                available: 3,
                required: 4
            })
        ));
    }

    #[test]
    fn count_frequencies_match_weights() {
        // Pearson chi-square against the configured weights; 16.27 is the
        // 0.999 quantile with three degrees of freedom.
        let w = SamplingWeights::default();
        let mut r = rng::seeded(42);
        let n = 100_000;
        let mut tally = [0usize; 4];
        for _ in 0..n {
            tally[sample_count(&w, &mut r)] += 1;
        }
        let chi2: f64 = tally
            .iter()
            .zip(w.weights())
            .map(|(&o, p)| {
                let e = p * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 16.27, "chi2 {chi2}, tally {tally:?}");
    }

    #[test]
    fn paradigm_rules() {
        let mut r = rng::seeded(3);
        let multi = ReferenceSelection {
            entries: pool(3),
            anchor: Some(0),
        };
        for kind in [SeedKind::Ansatz, SeedKind::FeatureMap, SeedKind::MlQmlPair] {
            assert_eq!(assign_paradigm(&multi, kind, &mut r), Paradigm::Combination);
        }
        let single = ReferenceSelection {
            entries: pool(1),
            anchor: None,
        };
        for _ in 0..100 {
            assert_eq!(
                assign_paradigm(&single, SeedKind::MlQmlPair, &mut r),
                Paradigm::Extension
            );
        }
        let n = 10_000;
        let ext = (0..n)
            .filter(|_| assign_paradigm(&single, SeedKind::Ansatz, &mut r) == Paradigm::Extension)
            .count();
        assert!((ext as f64 / n as f64 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn target_paths() {
        assert_eq!(target_path("QCNN/qcnn.py", 3), "QCNN/qcnn__scaled_3.py");
        assert_eq!(target_path("noext", 0), "noext__scaled_0.py");
    }

    #[test]
    fn single_reference_prompt() {
        let p = build_prompt(&task(1)).unwrap();
        for needle in [
            "#TargetOutput",
            "#ReferencePair[1]",
            "assistantfinal",
            "reference_pair_count: 1",
            "anchor_reference: ansatz/seed_0.py",
            "ml_seed_path: seed_codebase/ML-Github/ansatz/seed_0.py",
            "qml_seed_path: seed_codebase/QML-Github/ansatz/seed_0.py",
            "```python\nimport qiskit\n",
        ] {
            assert!(p.contains(needle), "missing {needle}");
        }
        assert!(!p.contains("#Combination Expectations"));
        assert!(!p.contains("#ReferencePair[2]"));
    }

    #[test]
    fn multi_reference_prompt_lists_anchor_first() {
        let p = build_prompt(&task(3)).unwrap();
        assert!(p.contains("Integrate substantive ideas from each reference pair"));
        assert!(p.contains("reference_pair_count: 3"));
        assert!(p.contains("anchor_reference: Autoencoder/seed_2.py"));
        let first = p.find("#ReferencePair[1]\nrelative_path: Autoencoder/seed_2.py");
        let second = p.find("#ReferencePair[2]\nrelative_path: ansatz/seed_0.py");
        let third = p.find("#ReferencePair[3]\nrelative_path: feature_map/seed_1.py");
        assert!(first < second && second < third && first.is_some());
        let comb = p.find("#Combination Expectations").unwrap();
        assert!(comb < p.find("#Constraints").unwrap());
        assert!(comb > p.find("#Scaling Paradigms").unwrap());
    }

    #[test]
    fn empty_quantum_reference_is_rejected() {
        let mut t = task(1);
        t.selection.entries[0].qml_code.clear();
        assert!(matches!(
            build_prompt(&t),
            Err(ScaleError::EmptyReferenceCode { .. })
        ));
    }

    #[test]
    fn pool_filters_sources() {
        let mut m = Manifest::default();
        for p in pool(4) {
            m.push(p).unwrap();
        }
        let mut scaled = seed_pair("x/y.py", "a = 1\n", "b = 2\n");
        scaled.source = Source::Scaled;
        m.push(scaled).unwrap();
        let mut no_q = seed_pair("x/z.py", "a = 1\n", "");
        no_q.syntax_valid = false;
        m.push(no_q).unwrap();
        assert_eq!(reference_pool(&m, false).len(), 4);
        assert_eq!(reference_pool(&m, true).len(), 5);
    }
}
