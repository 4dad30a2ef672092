use std::fs;
use std::path::Path;

use qbridge_core::corpus::{append_pairs, ingest_seed_tree, load_manifest, persist_manifest, KindRules, Source};
use qbridge_core::scaler::{run_campaign, CampaignConfig, MockClient};
use qbridge_core::stats::{default_family, export_sft, paradigm_table, LengthMeasure, SFT_PROMPT_TEMPLATE};

fn write(root: &Path, rel: &str, text: &str) {
    let path = root.join(rel);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn seed_tree(root: &Path) {
    write(root, "ML-Github/linear.py", "def fit(x, y):\n    return sum(y) / len(y)\n");
    write(
        root,
        "QML-Github/linear.py",
        "from qiskit import QuantumCircuit\n\n\ndef circuit(n):\n    return QuantumCircuit(n)\n",
    );
    write(root, "ML-Github/tree/forest.py", "class Forest:\n    depth = 3\n");
    write(root, "QML-Github/tree/forest.py", "class QuantumForest:\n    depth = 3\n");
    write(
        root,
        "QML-Github/ansatz/ry.py",
        "def ansatz(qc, thetas):\n    for q, t in enumerate(thetas):\n        qc.ry(t, q)\n",
    );
    write(root, "QML-Github/feature_map/zz.py", "def encode(qc, x):\n    qc.h(0)\n    qc.rz(2 * x[0], 0)\n");
}

fn campaign(out: &Path, seed: u64) -> qbridge_core::corpus::Manifest {
    let seeds = out.join("seeds");
    seed_tree(&seeds);
    let ingest = ingest_seed_tree(&seeds, &KindRules::default()).unwrap();
    let path = out.join("manifest.jsonl");
    persist_manifest(&ingest.manifest, &path).unwrap();
    let config = CampaignConfig {
        n_targets: 12,
        created_at: chrono::DateTime::UNIX_EPOCH,
        ..CampaignConfig::default()
    };
    let manifest = load_manifest(&path).unwrap();
    let outcome = run_campaign(&manifest, &config, &MockClient::builtin(), None, seed).unwrap();
    assert_eq!(outcome.report.appended, outcome.pairs.len());
    append_pairs(&path, &outcome.pairs).unwrap();
    load_manifest(&path).unwrap()
}

#[test]
fn ingest_scale_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = campaign(dir.path(), 9);
    let seeds = manifest.seeds().count();
    assert_eq!(seeds, 4);
    assert_eq!(manifest.len(), seeds + 12);
    for pair in manifest.pairs() {
        pair.validate().unwrap();
    }

    let table = paradigm_table(&manifest, default_family, LengthMeasure::LexicalTokens);
    assert_eq!(table.totals.total, 12);
    assert_eq!(table.totals.ref_counts.iter().sum::<usize>(), 12);
    assert_eq!(
        table.totals.extension_count + table.totals.controlled_modification_count + table.totals.combination_count,
        12
    );
    assert_eq!(table.rows.iter().map(|r| r.total).sum::<usize>(), 12);

    let export = export_sft(&manifest, SFT_PROMPT_TEMPLATE);
    let eligible = manifest
        .pairs()
        .iter()
        .filter(|p| p.syntax_valid && p.has_both_payloads())
        .count();
    assert_eq!(export.records.len(), eligible);
    assert_eq!(export.records.len() + export.skipped, manifest.len());
    for (record, pair) in export
        .records
        .iter()
        .zip(manifest.pairs().iter().filter(|p| p.syntax_valid && p.has_both_payloads()))
    {
        assert!(record.prompt.contains(&pair.ml_code));
        assert_eq!(record.completion, pair.qml_code);
    }
}

#[test]
fn campaigns_are_reproducible_from_the_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ids = |m: &qbridge_core::corpus::Manifest| {
        m.pairs()
            .iter()
            .filter(|p| p.source == Source::Scaled)
            .map(|p| (p.relative_path.clone(), p.references.clone(), p.paradigm))
            .collect::<Vec<_>>()
    };
    assert_eq!(ids(&campaign(a.path(), 4)), ids(&campaign(b.path(), 4)));
}
