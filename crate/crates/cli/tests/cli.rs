use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture_seeds() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/seeds")
}

fn qbridge(out: &Path, seeds: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbridge"))
        .arg("--seed-root")
        .arg(seeds)
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("QBRIDGE_LLM_URL")
        .env_remove("QBRIDGE_LLM_MODEL")
        .env_remove("QBRIDGE_LLM_KEY")
        .output()
        .expect("run qbridge")
}

fn ok(output: Output) -> String {
    assert!(
        output.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn offline_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let seeds = fixture_seeds();
    let manifest = out.join("manifest.jsonl");

    ok(qbridge(out, &seeds, &["ingest"]));
    assert_eq!(lines(&manifest), 5);

    ok(qbridge(out, &seeds, &["--seed", "3", "scale", "--mock", "-n", "20"]));
    assert_eq!(lines(&manifest), 25);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("scale_report.json")).unwrap()).unwrap();
    assert_eq!(report["appended"], 20);

    let stdout = ok(qbridge(out, &seeds, &["validate"]));
    assert!(stdout.contains("23 of 25 pairs syntax-valid"), "{stdout}");

    let stdout = ok(qbridge(out, &seeds, &["stats", "--measure", "chars", "--bucket-width", "100"]));
    assert!(stdout.lines().last().unwrap().ends_with(",20"), "{stdout}");
    assert!(fs::read_to_string(out.join("length_histogram.csv"))
        .unwrap()
        .starts_with("bucket_start,bucket_end,cml,qml\n0,100,"));

    ok(qbridge(out, &seeds, &["export-sft"]));
    let sft = fs::read_to_string(out.join("sft.jsonl")).unwrap();
    assert_eq!(sft.lines().count(), 23);
    for line in sft.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(record["prompt"].as_str().unwrap().ends_with("QML Solution:"));
        assert!(!record["completion"].as_str().unwrap().is_empty());
    }
}

#[test]
fn scaling_twice_grows_the_manifest_by_n_each_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let seeds = fixture_seeds();
    ok(qbridge(out, &seeds, &["ingest"]));
    ok(qbridge(out, &seeds, &["scale", "--mock", "-n", "4"]));
    ok(qbridge(out, &seeds, &["--seed", "1", "scale", "--mock", "-n", "6", "--include-scaled"]));
    assert_eq!(lines(&out.join("manifest.jsonl")), 15);
}

#[test]
fn broken_seed_fails_validation_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds");
    fs::create_dir_all(seeds.join("ML-Github")).unwrap();
    fs::create_dir_all(seeds.join("QML-Github")).unwrap();
    fs::write(seeds.join("ML-Github/model.py"), "def fit(x:\n    return x\n").unwrap();
    fs::write(seeds.join("QML-Github/model.py"), "def fit(x):\n    return x\n").unwrap();
    let out = dir.path().join("out");
    ok(qbridge(&out, &seeds, &["ingest"]));
    let output = qbridge(&out, &seeds, &["validate"]);
    assert_eq!(output.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("validate_report.json")).unwrap()).unwrap();
    assert_eq!(report["syntax_valid"], 0);
    assert_eq!(report["failures"][0]["relative_path"], "model.py");
}

#[test]
fn classification_eval_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let stdout = ok(qbridge(
        out,
        &fixture_seeds(),
        &["--seed", "7", "eval", "--model", "qml", "--reps", "2", "--dataset", "synthetic_classification", "--k", "5"],
    ));
    assert!(stdout.contains("| Accuracy "), "{stdout}");
    let json = out.join("eval_synthetic_classification_2_3_qml_seed7.json");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["folds_completed"], 5);
    assert_eq!(report["k"], 5);
    assert!(out.join("eval_synthetic_classification_2_3_qml_seed7.txt").exists());
}

#[test]
fn config_file_supplies_defaults_that_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("qbridge.toml");
    fs::write(&config, "k = 3\nrng_seed = 11\nout_dir = \"from-config\"\n").unwrap();
    let run = |extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qbridge"));
        cmd.arg("--config").arg(&config);
        cmd.args(["eval", "--model", "mlp", "--hidden-dims", "8", "--epochs", "5", "--dataset", "synthetic_regression"]);
        ok(cmd.args(extra).output().unwrap())
    };
    run(&[]);
    let written = dir.path().join("from-config/eval_synthetic_regression_4_mlp_seed11.json");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(written).unwrap()).unwrap();
    assert_eq!(report["k"], 3);

    run(&["--k", "4"]);
    let written = dir.path().join("from-config/eval_synthetic_regression_4_mlp_seed11.json");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(written).unwrap()).unwrap();
    assert_eq!(report["k"], 4);
}

#[test]
fn usage_errors_exit_2() {
    let bin = env!("CARGO_BIN_EXE_qbridge");
    for args in [
        &["frobnicate"][..],
        &["stats", "--bucket-width", "0"],
        &["eval", "--dataset", "mnist"],
        &["--config", "/nonexistent/qbridge.toml", "stats"],
    ] {
        let output = Command::new(bin).args(args).output().unwrap();
        assert_eq!(output.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unreachable_endpoint_rejects_tasks_without_touching_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let seeds = fixture_seeds();
    ok(qbridge(out, &seeds, &["ingest"]));
    let output = qbridge(out, &seeds, &["--endpoint-url", "http://127.0.0.1:9/v1", "scale", "-n", "2"]);
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    assert!(stderr.contains("endpoint unreachable"), "{stderr}");
    assert!(ok(output).contains("appended 0"));
    assert_eq!(lines(&out.join("manifest.jsonl")), 5);
}

#[test]
fn selftest_passes() {
    let output = Command::new(env!("CARGO_BIN_EXE_qbridge")).arg("selftest").output().unwrap();
    let stdout = ok(output);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}
