//! Command-line front end for the corpus pipeline and the evaluation bench.

pub mod config;
pub mod selftest;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qbridge_core::corpus::{
    append_pairs, ingest_seed_tree, load_manifest, persist_manifest, KindRules, Manifest,
};
use qbridge_core::evalbench::{
    evaluate_model, load_csv_dataset, make_dataset, render_table, write_report, CsvTask, Dataset,
    DatasetKind, EvalReport, Task,
};
use qbridge_core::scaler::{run_campaign, CampaignConfig, CompletionClient, MockClient};
use qbridge_core::stats::{
    default_family, export_sft, length_histogram, paradigm_table, LengthMeasure, PairScope,
    SeriesSplit, SFT_PROMPT_TEMPLATE,
};
use qbridge_core::syntax::{gate_pair, ExternalChecker, Severity, Side};
use qbridge_core::train::{CobylaConfig, MlpModel, QmlModel, QmlModelSpec, QmlTask};
use thiserror::Error;

use config::{CliConfig, FileConfig, FlagConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, subcommand or configuration; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The data failed a check; exit code 1.
    #[error("{0}")]
    Validation(String),
    /// Anything else that stopped the command; exit code 1.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) | CliError::Failure(_) => 1,
        }
    }
}

/// `print!` that drops write errors such as a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

/// `println!` that drops write errors such as a closed pipe.
macro_rules! outln {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "qbridge", version, about = "Build, check and evaluate a paired classical/quantum code corpus")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every output file.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Manifest path; defaults to `<out-dir>/manifest.jsonl`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Root of the seed tree.
    #[arg(long, global = true)]
    seed_root: Option<PathBuf>,
    /// RNG seed for sampling, splits and model initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Completion endpoint URL.
    #[arg(long, global = true)]
    endpoint_url: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long, global = true)]
    model_name: Option<String>,
    /// External syntax check command; `{file}` is replaced by a temp file path.
    #[arg(long, global = true)]
    external_checker: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan the seed tree and write a fresh manifest.
    Ingest,
    /// Generate new pairs and append the ones that pass the syntax gate.
    Scale(ScaleArgs),
    /// Re-run the syntax gate over the manifest and rewrite its flags. Seeds
    /// with only a quantum side are checked on that side and stay unflagged.
    Validate,
    /// Write length histograms and the paradigm table.
    Stats(StatsArgs),
    /// Write supervised fine-tuning records.
    ExportSft(ExportArgs),
    /// Cross-validate a model on a dataset.
    Eval(EvalArgs),
    /// Run the quick oracle suite.
    Selftest,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    /// Number of generations to attempt.
    #[arg(long, short = 'n', default_value_t = 20)]
    n: usize,
    /// Use the bundled canned responses instead of the endpoint.
    #[arg(long)]
    mock: bool,
    #[arg(long)]
    temperature: Option<f64>,
    /// Let syntax-valid scaled pairs serve as references.
    #[arg(long)]
    include_scaled: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeasureArg {
    Chars,
    Tokens,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    All,
    Scaled,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SeriesArg {
    Sides,
    Families,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long, value_enum, default_value_t = MeasureArg::Tokens)]
    measure: MeasureArg,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    bucket_width: u64,
    #[arg(long, value_enum, default_value_t = ScopeArg::Scaled)]
    scope: ScopeArg,
    #[arg(long, value_enum, default_value_t = SeriesArg::Sides)]
    series: SeriesArg,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Output file; defaults to `<out-dir>/sft.jsonl`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Qml,
    Mlp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CsvTaskArg {
    Regression,
    Classification,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Feature-map and ansatz repetitions.
    #[arg(long, default_value_t = 2)]
    reps: usize,
    /// Comma-separated hidden layer widths.
    #[arg(long, default_value = "64,32", value_delimiter = ',')]
    hidden_dims: Vec<usize>,
    /// Built-in dataset, e.g. `iris_regression_3f`, `synthetic_regression(4)`,
    /// `synthetic_classification(2,3)`.
    #[arg(long, default_value = "iris_regression_3f", conflicts_with = "csv")]
    dataset: String,
    /// Numeric CSV file to evaluate on instead of a built-in dataset.
    #[arg(long, requires = "target")]
    csv: Option<PathBuf>,
    /// Target column of `--csv`.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_enum, default_value_t = CsvTaskArg::Regression)]
    task: CsvTaskArg,
    /// Number of folds.
    #[arg(long)]
    k: Option<usize>,
    /// Objective evaluation budget per fold for the quantum model.
    #[arg(long, default_value_t = CobylaConfig::default().max_evals)]
    max_evals: usize,
    /// Training epochs for the MLP.
    #[arg(long)]
    epochs: Option<usize>,
}

/// Parses `args` (including the program name) and runs the subcommand with
/// the process environment. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_env(args, |k| std::env::var(k).ok())
}

pub fn run_with_env<I, T>(args: I, env: impl Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, env) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, env: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
    let g = cli.global;
    let file = match &g.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let (temperature, k) = match &cli.command {
        Command::Scale(a) => (a.temperature, None),
        Command::Eval(a) => (None, a.k),
        _ => (None, None),
    };
    let flags = FlagConfig {
        seed_root: g.seed_root,
        manifest_path: g.manifest,
        out_dir: g.out_dir,
        rng_seed: g.seed,
        temperature,
        k,
        external_checker: g.external_checker,
        endpoint_url: g.endpoint_url,
        model_name: g.model_name,
    };
    let cwd = std::env::current_dir().map_err(fail)?;
    let cfg = CliConfig::resolve(&flags, env, &file, &cwd)?;
    match cli.command {
        Command::Ingest => ingest(&cfg),
        Command::Scale(a) => scale(&cfg, &a),
        Command::Validate => validate(&cfg),
        Command::Stats(a) => stats(&cfg, &a),
        Command::ExportSft(a) => export(&cfg, &a),
        Command::Eval(a) => eval(&cfg, &a),
        Command::Selftest => run_selftest(),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| fail(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn checker(cfg: &CliConfig) -> Result<Option<ExternalChecker>, CliError> {
    cfg.external_checker
        .as_deref()
        .map(ExternalChecker::new)
        .transpose()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn manifest(cfg: &CliConfig) -> Result<Manifest, CliError> {
    load_manifest(&cfg.manifest_path).map_err(fail)
}

fn ingest(cfg: &CliConfig) -> Result<(), CliError> {
    let result = ingest_seed_tree(&cfg.seed_root, &KindRules::default()).map_err(fail)?;
    for w in &result.report.warnings {
        eprintln!("warning: {}", serde_json::to_string(w).map_err(fail)?);
    }
    if let Some(parent) = cfg.manifest_path.parent() {
        ensure_dir(parent)?;
    }
    persist_manifest(&result.manifest, &cfg.manifest_path).map_err(fail)?;
    outln!(
        "ingested {} seed pairs from {} into {}",
        result.manifest.len(),
        cfg.seed_root.display(),
        cfg.manifest_path.display()
    );
    Ok(())
}

fn scale(cfg: &CliConfig, args: &ScaleArgs) -> Result<(), CliError> {
    let manifest = manifest(cfg)?;
    let config = CampaignConfig {
        n_targets: args.n,
        weights: cfg.weights,
        temperature: cfg.temperature,
        endpoint: cfg.endpoint.clone(),
        include_scaled_references: args.include_scaled,
        created_at: chrono::Utc::now(),
        ..CampaignConfig::default()
    };
    let client: Box<dyn CompletionClient> = if args.mock {
        Box::new(MockClient::builtin())
    } else {
        live_client(cfg)?
    };
    let checker = checker(cfg)?;
    let outcome = run_campaign(&manifest, &config, client.as_ref(), checker.as_ref(), cfg.rng_seed)
        .map_err(fail)?;
    append_pairs(&cfg.manifest_path, &outcome.pairs).map_err(fail)?;
    let report = &outcome.report;
    write_file(
        &cfg.out_dir.join("scale_report.json"),
        &(serde_json::to_string_pretty(report).map_err(fail)? + "\n"),
    )?;
    for r in &report.rejected {
        eprintln!("rejected task {} ({}): {}", r.task_index, r.target, r.reason);
    }
    outln!(
        "attempted {}, parsed {}, syntax-valid {}, appended {} to {}",
        report.attempted,
        report.parsed,
        report.syntax_valid,
        report.appended,
        cfg.manifest_path.display()
    );
    Ok(())
}

#[cfg(feature = "http")]
fn live_client(cfg: &CliConfig) -> Result<Box<dyn CompletionClient>, CliError> {
    Ok(Box::new(qbridge_core::scaler::HttpClient::new(cfg.endpoint.clone())))
}

#[cfg(not(feature = "http"))]
fn live_client(_cfg: &CliConfig) -> Result<Box<dyn CompletionClient>, CliError> {
    Err(CliError::Usage("built without the `http` feature; use --mock".into()))
}

fn validate(cfg: &CliConfig) -> Result<(), CliError> {
    let mut manifest = manifest(cfg)?;
    let checker = checker(cfg)?;
    let mut flags = Vec::with_capacity(manifest.len());
    let mut failures = Vec::new();
    for pair in manifest.pairs() {
        let outcome = gate_pair(pair, checker.as_ref());
        let present = |side: Side| match side {
            Side::Ml => !pair.ml_code.is_empty(),
            Side::Qml => !pair.qml_code.is_empty(),
        };
        let errors: Vec<_> = outcome
            .findings
            .iter()
            .filter(|f| f.finding.severity == Severity::Error && present(f.side))
            .collect();
        if !errors.is_empty() {
            failures.push(serde_json::json!({
                "id": pair.id,
                "relative_path": pair.relative_path,
                "findings": errors,
            }));
        }
        flags.push(outcome.pair.syntax_valid && pair.has_both_payloads());
    }
    manifest.set_syntax_flags(&flags);
    persist_manifest(&manifest, &cfg.manifest_path).map_err(fail)?;
    let valid = flags.iter().filter(|&&f| f).count();
    write_file(
        &cfg.out_dir.join("validate_report.json"),
        &(serde_json::to_string_pretty(&serde_json::json!({
            "pairs": manifest.len(),
            "syntax_valid": valid,
            "failures": failures,
        }))
        .map_err(fail)?
            + "\n"),
    )?;
    outln!("{valid} of {} pairs syntax-valid", manifest.len());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} pairs failed the syntax gate", failures.len())))
    }
}

fn stats(cfg: &CliConfig, args: &StatsArgs) -> Result<(), CliError> {
    let manifest = manifest(cfg)?;
    let measure = match args.measure {
        MeasureArg::Chars => LengthMeasure::Chars,
        MeasureArg::Tokens => LengthMeasure::LexicalTokens,
    };
    let scope = match args.scope {
        ScopeArg::All => PairScope::All,
        ScopeArg::Scaled => PairScope::Scaled,
    };
    let series = match args.series {
        SeriesArg::Sides => SeriesSplit::Sides,
        SeriesArg::Families => SeriesSplit::Families,
    };
    let histogram = length_histogram(&manifest, measure, args.bucket_width as usize, scope, series);
    let table = paradigm_table(&manifest, default_family, measure);
    write_file(&cfg.out_dir.join("length_histogram.csv"), &histogram.to_csv())?;
    let table_csv = table.to_csv();
    write_file(&cfg.out_dir.join("paradigm_table.csv"), &table_csv)?;
    write_file(
        &cfg.out_dir.join("stats.json"),
        &(serde_json::to_string_pretty(&serde_json::json!({
            "histogram": histogram,
            "paradigm_table": table,
        }))
        .map_err(fail)?
            + "\n"),
    )?;
    out!("{table_csv}");
    Ok(())
}

fn export(cfg: &CliConfig, args: &ExportArgs) -> Result<(), CliError> {
    let manifest = manifest(cfg)?;
    let records = export_sft(&manifest, SFT_PROMPT_TEMPLATE);
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("sft.jsonl"));
    let mut buffer = Vec::new();
    records.write_jsonl(&mut buffer).map_err(fail)?;
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::File::create(&path)
        .and_then(|mut f| f.write_all(&buffer))
        .map_err(|e| fail(format!("{}: {e}", path.display())))?;
    outln!(
        "exported {} records to {} (skipped {})",
        records.records.len(),
        path.display(),
        records.skipped
    );
    Ok(())
}

fn eval_dataset(cfg: &CliConfig, args: &EvalArgs) -> Result<Dataset, CliError> {
    match &args.csv {
        Some(path) => {
            let task = match args.task {
                CsvTaskArg::Regression => CsvTask::Regression {
                    standardize_target: true,
                },
                CsvTaskArg::Classification => CsvTask::Classification,
            };
            let target = args.target.as_deref().expect("clap requires --target");
            load_csv_dataset(path, target, task).map_err(fail)
        }
        None => {
            let kind: DatasetKind = args
                .dataset
                .parse()
                .map_err(|e: qbridge_core::evalbench::EvalError| CliError::Usage(e.to_string()))?;
            make_dataset(kind, cfg.rng_seed).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

/// Runs the evaluation behind `eval` and returns the report without
/// writing it.
fn evaluate(cfg: &CliConfig, args: &EvalArgs) -> Result<EvalReport, CliError> {
    let dataset = eval_dataset(cfg, args)?;
    let classifier = matches!(dataset.task(), Task::Classification { .. });
    let report = match args.model {
        ModelArg::Qml => {
            if args.reps == 0 {
                return Err(CliError::Usage("--reps must be at least 1".into()));
            }
            let task = match dataset.task() {
                Task::Regression => QmlTask::Regression,
                Task::Classification { n_classes } => QmlTask::Classification { n_classes },
            };
            let mut model = QmlModel::new(QmlModelSpec::new(dataset.n_features(), args.reps, task));
            model.optimizer.max_evals = args.max_evals;
            evaluate_model(&model, &dataset, cfg.k, cfg.rng_seed)
        }
        ModelArg::Mlp => {
            let mut model = MlpModel::new(args.hidden_dims.clone(), classifier);
            if let Some(e) = args.epochs {
                model.train.epochs = e;
            }
            evaluate_model(&model, &dataset, cfg.k, cfg.rng_seed)
        }
    };
    report.map_err(|e| match e {
        qbridge_core::evalbench::EvalError::InvalidArgument(_)
        | qbridge_core::evalbench::EvalError::TaskMismatch => CliError::Usage(e.to_string()),
        other => fail(other),
    })
}

fn eval(cfg: &CliConfig, args: &EvalArgs) -> Result<(), CliError> {
    let report = evaluate(cfg, args)?;
    let (json, _) = write_report(&report, &cfg.out_dir).map_err(fail)?;
    out!("{}", render_table(&report));
    outln!("report: {}", json.display());
    Ok(())
}

fn run_selftest() -> Result<(), CliError> {
    let checks = selftest::run_all();
    for c in &checks {
        outln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{failed} checks failed")))
    }
}
