use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::client::{ClientError, CompletionClient, CompletionRequest, EndpointConfig};
use super::{
    assign_paradigm, build_prompt, reference_pool, sample_references, target_path,
    SamplingWeights, ScaleError, ScalingTask,
};
use crate::contract::{parse_contract, ContractParadigm};
use crate::corpus::{pair_id, CodePair, Generator, KindRules, Manifest, Paradigm, SeedKind, Source};
use crate::rng;
use crate::syntax::{gate_pair, ExternalChecker, Severity, Side};

/// Settings for one scaling campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub n_targets: usize,
    pub weights: SamplingWeights,
    pub temperature: f64,
    pub endpoint: EndpointConfig,
    /// Let syntax-valid scaled pairs already in the manifest act as references.
    pub include_scaled_references: bool,
    pub rules: KindRules,
    /// Timestamp stamped on every generated pair.
    pub created_at: DateTime<Utc>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            n_targets: 0,
            weights: SamplingWeights::default(),
            temperature: 0.6,
            endpoint: EndpointConfig::default(),
            include_scaled_references: false,
            rules: KindRules::default(),
            created_at: DateTime::UNIX_EPOCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub task_index: usize,
    pub target: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CampaignReport {
    pub attempted: usize,
    pub parsed: usize,
    pub syntax_valid: usize,
    pub appended: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    /// Gated pairs to append, in task order.
    pub pairs: Vec<CodePair>,
    pub report: CampaignReport,
}

fn check_temperature(t: f64) -> Result<(), ScaleError> {
    if t > 0.0 && t <= 2.0 {
        Ok(())
    } else {
        Err(ScaleError::InvalidConfig(format!(
            "temperature {t} outside (0, 2]"
        )))
    }
}

/// Draws every task of a campaign. Task `i` uses its own stream of `seed`,
/// so the plan does not depend on execution order.
pub fn plan_tasks(
    manifest: &Manifest,
    config: &CampaignConfig,
    seed: u64,
) -> Result<Vec<ScalingTask>, ScaleError> {
    check_temperature(config.temperature)?;
    if config.n_targets == 0 {
        return Ok(Vec::new());
    }
    let pool = reference_pool(manifest, config.include_scaled_references);
    (0..config.n_targets)
        .map(|index| {
            let mut r = rng::stream(seed, index as u64);
            let selection = sample_references(&pool, &config.weights, &mut r)?;
            let anchor = selection.anchor_entry().relative_path.clone();
            let seed_kind = config.rules.kind_of(&anchor);
            let paradigm = assign_paradigm(&selection, seed_kind, &mut r);
            Ok(ScalingTask {
                index,
                target_relative_path: target_path(&anchor, manifest.len() + index),
                selection,
                paradigm,
                temperature: config.temperature,
                seed_kind,
            })
        })
        .collect()
}

/// Requests one generation, retrying contract violations up to
/// `retry_limit` times and rate limits with doubling backoff.
///
/// Single-reference pairs take the paradigm the generation declares; a
/// classical/quantum pair declaring controlled modification is a contract
/// violation. Multi-reference pairs are always combinations.
pub fn generate_one(
    task: &ScalingTask,
    endpoint: &EndpointConfig,
    client: &dyn CompletionClient,
    created_at: DateTime<Utc>,
) -> Result<CodePair, ScaleError> {
    check_temperature(task.temperature)?;
    let prompt = build_prompt(task)?;
    let attempts = endpoint.retry_limit + 1;
    let mut backoff = endpoint.backoff;
    let mut last_violation = String::new();
    let mut rate_limited = false;
    for attempt in 0..attempts {
        let request = CompletionRequest {
            prompt: &prompt,
            temperature: task.temperature,
            max_tokens: endpoint.max_tokens,
            task_index: task.index,
            attempt,
        };
        let text = match client.complete(&request) {
            Ok(text) => text,
            Err(ClientError::RateLimited) => {
                rate_limited = true;
                if attempt + 1 < attempts {
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
                continue;
            }
            Err(ClientError::Unreachable(m)) => return Err(ScaleError::EndpointUnreachable(m)),
            Err(e) => return Err(ScaleError::Endpoint(e.to_string())),
        };
        rate_limited = false;
        let record = match parse_contract(&text) {
            Ok(r) => r,
            Err(e) => {
                last_violation = e.to_string();
                continue;
            }
        };
        if task.selection.count() == 1
            && task.seed_kind == SeedKind::MlQmlPair
            && record.scaling_paradigm == ContractParadigm::ControlledModification
        {
            last_violation = "controlled modification declared for a classical/quantum pair".into();
            continue;
        }
        let paradigm = if task.selection.count() >= 2 {
            Paradigm::Combination
        } else {
            Paradigm::from(record.scaling_paradigm)
        };
        let references: Vec<String> = task
            .selection
            .ordered()
            .iter()
            .map(|r| r.relative_path.clone())
            .collect();
        return Ok(CodePair {
            id: pair_id(&task.target_relative_path, &record.ml_code, &record.qml_code),
            relative_path: task.target_relative_path.clone(),
            source: Source::Scaled,
            paradigm: Some(paradigm),
            reference_count: references.len() as u8,
            references,
            ml_code: record.ml_code,
            qml_code: record.qml_code,
            syntax_valid: false,
            generator: Some(Generator {
                model_name: client.model_name().to_string(),
                temperature: task.temperature,
            }),
            created_at,
        });
    }
    if rate_limited {
        Err(ScaleError::RateLimited { attempts })
    } else {
        Err(ScaleError::ContractViolation {
            attempts,
            reason: last_violation,
        })
    }
}

/// Runs `config.n_targets` generations with up to `max_in_flight` in flight,
/// gates each result and returns the pairs to append with a report.
///
/// Per-task failures are reported, not raised. Output is identical for any
/// degree of concurrency given the same seed and a deterministic client.
pub fn run_campaign(
    manifest: &Manifest,
    config: &CampaignConfig,
    client: &dyn CompletionClient,
    checker: Option<&ExternalChecker>,
    seed: u64,
) -> Result<CampaignOutcome, ScaleError> {
    if config.endpoint.max_in_flight == 0 {
        return Err(ScaleError::InvalidConfig("max_in_flight must be at least 1".into()));
    }
    let tasks = plan_tasks(manifest, config, seed)?;
    let results: Vec<Mutex<Option<Result<CodePair, ScaleError>>>> =
        tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.endpoint.max_in_flight.min(tasks.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                let r = generate_one(task, &config.endpoint, client, config.created_at);
                *results[i].lock().expect("result slot") = Some(r);
            });
        }
    });

    let mut report = CampaignReport {
        attempted: tasks.len(),
        ..CampaignReport::default()
    };
    let mut seen: HashSet<String> = manifest.pairs().iter().map(|p| p.id.clone()).collect();
    let mut pairs = Vec::new();
    for (task, slot) in tasks.iter().zip(results) {
        let reject = |reason: String| Rejection {
            task_index: task.index,
            target: task.target_relative_path.clone(),
            reason,
        };
        let generated = slot
            .into_inner()
            .expect("result slot")
            .expect("every task ran");
        let pair = match generated {
            Ok(p) => p,
            Err(e) => {
                report.rejected.push(reject(e.to_string()));
                continue;
            }
        };
        report.parsed += 1;
        let gate = gate_pair(&pair, checker);
        if !gate.pair.syntax_valid {
            let first = gate
                .findings
                .iter()
                .find(|f| f.finding.severity == Severity::Error)
                .map(|f| {
                    let side = match f.side {
                        Side::Ml => "ml_code",
                        Side::Qml => "qml_code",
                    };
                    format!("syntax: {side} {}", f.finding)
                })
                .unwrap_or_else(|| "syntax: rejected".into());
            report.rejected.push(reject(first));
            continue;
        }
        report.syntax_valid += 1;
        if !seen.insert(gate.pair.id.clone()) {
            report.rejected.push(reject(format!("duplicate id {}", gate.pair.id)));
            continue;
        }
        pairs.push(gate.pair);
    }
    report.appended = pairs.len();
    Ok(CampaignOutcome { pairs, report })
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::super::tests::pool;
    use super::super::{MockClient, ReferenceSelection};
    use super::*;
    use crate::contract::{serialize_contract, ContractRecord};

    fn manifest() -> Manifest {
        let mut m = Manifest::default();
        for p in pool(8) {
            m.push(p).unwrap();
        }
        m
    }

    fn response(name: &str, paradigm: ContractParadigm) -> String {
        serialize_contract(&ContractRecord {
            name: name.into(),
            scaling_paradigm: paradigm,
            summary: "Adds a layer.".into(),
            ml_code: format!("class {name}:\n    pass\n"),
            qml_code: format!("import qiskit\n\n\nclass {name}:\n    pass\n"),
        })
        .unwrap()
    }

    fn config(n: usize) -> CampaignConfig {
        CampaignConfig {
            n_targets: n,
            endpoint: EndpointConfig {
                backoff: Duration::ZERO,
                ..EndpointConfig::default()
            },
            ..CampaignConfig::default()
        }
    }

    fn single_task(kind: SeedKind) -> ScalingTask {
        ScalingTask {
            index: 0,
            selection: ReferenceSelection {
                entries: pool(1),
                anchor: None,
            },
            paradigm: Paradigm::Extension,
            target_relative_path: "ansatz/seed_0__scaled_8.py".into(),
            temperature: 0.1,
            seed_kind: kind,
        }
    }

    #[test]
    fn generated_pair_records_paradigm_and_generator() {
        let client = MockClient::per_task(vec![response(
            "Deep",
            ContractParadigm::ControlledModification,
        )]);
        let p = generate_one(
            &single_task(SeedKind::Ansatz),
            &config(1).endpoint,
            &client,
            DateTime::UNIX_EPOCH,
        )
        .unwrap();
        assert_eq!(p.paradigm, Some(Paradigm::ControlledModification));
        assert_eq!(p.source, Source::Scaled);
        assert!(!p.syntax_valid);
        let g = p.generator.as_ref().unwrap();
        assert_eq!((g.model_name.as_str(), g.temperature), ("mock", 0.1));
        assert_eq!(p.references, vec!["ansatz/seed_0.py".to_string()]);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn persistent_violation_exhausts_retries() {
        let endpoint = EndpointConfig {
            retry_limit: 1,
            ..config(1).endpoint
        };
        let calls = std::sync::Arc::new(AtomicUsize::new(0));
        let counter = calls.clone();
        let client = MockClient::from_fn("mock", move |_| {
            counter.fetch_add(1, Ordering::SeqCst);
            Ok("name: X\n".to_string())
        });
        let err = generate_one(
            &single_task(SeedKind::Ansatz),
            &endpoint,
            &client,
            DateTime::UNIX_EPOCH,
        )
        .unwrap_err();
        assert!(matches!(err, ScaleError::ContractViolation { attempts: 2, .. }), "{err}");
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn retry_recovers() {
        let client = MockClient::per_attempt(vec![
            "garbage".into(),
            response("Ok", ContractParadigm::Extension),
        ]);
        let p = generate_one(
            &single_task(SeedKind::Ansatz),
            &config(1).endpoint,
            &client,
            DateTime::UNIX_EPOCH,
        );
        assert!(p.is_ok());
    }

    #[test]
    fn pair_kind_rejects_controlled_modification() {
        let client = MockClient::per_task(vec![response(
            "Mod",
            ContractParadigm::ControlledModification,
        )]);
        let err = generate_one(
            &single_task(SeedKind::MlQmlPair),
            &config(1).endpoint,
            &client,
            DateTime::UNIX_EPOCH,
        )
        .unwrap_err();
        assert!(matches!(err, ScaleError::ContractViolation { .. }));
    }

    #[test]
    fn rate_limits_back_off_then_fail() {
        let client = MockClient::from_fn("mock", |_| Err(ClientError::RateLimited));
        let err = generate_one(
            &single_task(SeedKind::Ansatz),
            &config(1).endpoint,
            &client,
            DateTime::UNIX_EPOCH,
        )
        .unwrap_err();
        assert!(matches!(err, ScaleError::RateLimited { attempts: 3 }));
        let client = MockClient::from_fn("mock", |r| {
            if r.attempt == 0 {
                Err(ClientError::RateLimited)
            } else {
                Ok(response("Ok", ContractParadigm::Extension))
            }
        });
        assert!(generate_one(
            &single_task(SeedKind::Ansatz),
            &config(1).endpoint,
            &client,
            DateTime::UNIX_EPOCH
        )
        .is_ok());
    }

    #[test]
    fn five_valid_responses_append_five() {
        let client = MockClient::per_task(
            (0..5)
                .map(|i| response(&format!("M{i}"), ContractParadigm::Extension))
                .collect(),
        );
        let out = run_campaign(&manifest(), &config(5), &client, None, 1).unwrap();
        assert_eq!(out.pairs.len(), 5);
        assert_eq!(out.report.parsed, 5);
        assert_eq!(out.report.syntax_valid, 5);
        assert!(out.report.rejected.is_empty());
        for p in &out.pairs {
            assert!(p.syntax_valid);
            assert!(p.validate().is_ok());
        }
    }

    #[test]
    fn zero_targets() {
        let out = run_campaign(&Manifest::default(), &config(0), &MockClient::builtin(), None, 1)
            .unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.report, CampaignReport::default());
    }

    #[test]
    fn alternating_schedule() {
        for n in [1, 4, 7] {
            let client = MockClient::per_task(vec![
                response("Good", ContractParadigm::Extension),
                "not a contract".into(),
            ]);
            let out = run_campaign(&manifest(), &config(n), &client, None, 3).unwrap();
            assert_eq!(out.report.parsed, n.div_ceil(2));
            assert_eq!(out.report.rejected.len(), n / 2);
        }
    }

    #[test]
    fn syntax_failures_are_rejected() {
        let bad = serialize_contract(&ContractRecord {
            name: "Bad".into(),
            scaling_paradigm: ContractParadigm::Extension,
            summary: "s".into(),
            ml_code: "def f(:\n    pass\n".into(),
            qml_code: "x = 1\n".into(),
        })
        .unwrap();
        let out =
            run_campaign(&manifest(), &config(2), &MockClient::per_task(vec![bad]), None, 0).unwrap();
        assert_eq!(out.report.parsed, 2);
        assert_eq!(out.report.syntax_valid, 0);
        assert!(out.pairs.is_empty());
        assert!(out.report.rejected[0].reason.starts_with("syntax: ml_code"));
    }

    #[test]
    fn concurrency_does_not_change_output() {
        let mut c1 = config(12);
        c1.endpoint.max_in_flight = 1;
        let mut c8 = config(12);
        c8.endpoint.max_in_flight = 8;
        let a = run_campaign(&manifest(), &c1, &MockClient::builtin(), None, 77).unwrap();
        let b = run_campaign(&manifest(), &c8, &MockClient::builtin(), None, 77).unwrap();
        assert_eq!(a, b);
        let c = run_campaign(&manifest(), &c8, &MockClient::builtin(), None, 78).unwrap();
        assert_ne!(a.pairs, c.pairs);
    }

    #[test]
    fn campaign_pairs_obey_paradigm_rules() {
        let rules = KindRules::default();
        let out = run_campaign(&manifest(), &config(60), &MockClient::builtin(), None, 5).unwrap();
        assert_eq!(out.pairs.len(), 60);
        for p in &out.pairs {
            assert!(p.validate().is_ok());
            if p.reference_count >= 2 {
                assert_eq!(p.paradigm, Some(Paradigm::Combination));
            } else if rules.kind_of(&p.references[0]) == SeedKind::MlQmlPair {
                assert_eq!(p.paradigm, Some(Paradigm::Extension));
            }
        }
    }

    #[test]
    fn insufficient_seeds_abort() {
        let mut m = Manifest::default();
        for p in pool(3) {
            m.push(p).unwrap();
        }
        assert!(matches!(
            run_campaign(&m, &config(1), &MockClient::builtin(), None, 0),
            Err(ScaleError::InsufficientSeeds { .. })
        ));
    }

    #[test]
    fn temperature_bounds() {
        let mut c = config(1);
        c.temperature = 0.0;
        assert!(plan_tasks(&manifest(), &c, 0).is_err());
        c.temperature = 2.0;
        assert!(plan_tasks(&manifest(), &c, 0).is_ok());
    }
}
