//! `mlcsearch` command-line interface.
//!
//! Exit codes: 0 on success, 1 for configuration or data faults (one JSON
//! line on stderr), 2 when a search finished without any successful
//! evaluation.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;

use mlcsearch::bayes::{bayes_optimal, expected_loss, marginals, DistributionDocument};
use mlcsearch::data::{label_stats, load_csv, load_meka_arff, write_csv, LabelPosition};
use mlcsearch::deadline::Deadline;
use mlcsearch::eval::{
    fit_pipeline, mccv, outer_split, EvalError, EvalSettings, GuardConfig, Pipeline, PipelineEvaluator,
};
use mlcsearch::losses::{threshold_scores, LossTable};
use mlcsearch::optimize::{run_optimizer, Aggregation, HalvingConfig, OptConfig, OptStatus, OptimizerKind, TraceEvent};
use mlcsearch::searchspace::{builtin_registry, export_dag_dot, load_registry, ComponentInstance, ComponentRegistry};
use mlcsearch::synth::{generate, SynthKind};
use mlcsearch::{Dataset, LossKind};

#[derive(Parser)]
#[command(
    name = "mlcsearch",
    version,
    about = "Multi-label AutoML over recursively composed classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a pipeline and report held-out test losses.
    Run(RunArgs),
    /// Evaluate one pipeline with Monte-Carlo cross-validation.
    Eval(EvalArgs),
    /// Loss table of predictions against ground truth.
    Losses(LossesArgs),
    /// Bayes-optimal predictions for an explicit label distribution.
    Bayes {
        #[arg(long)]
        dist: PathBuf,
    },
    /// Inspect the component registry.
    Space {
        #[arg(value_enum)]
        action: SpaceAction,
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Arff,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelPos {
    Prefix,
    Suffix,
}

impl From<LabelPos> for LabelPosition {
    fn from(p: LabelPos) -> Self {
        match p {
            LabelPos::Prefix => LabelPosition::Prefix,
            LabelPos::Suffix => LabelPosition::Suffix,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceAction {
    Show,
    Validate,
    Dot,
}

#[derive(clap::Args, Clone, Serialize)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    #[serde(skip)]
    format: Format,
    /// Number of label columns (CSV only).
    #[arg(long)]
    labels: Option<usize>,
    #[arg(long, value_enum, default_value = "suffix")]
    #[serde(skip)]
    label_pos: LabelPos,
}

#[derive(clap::Args, Serialize)]
struct RunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "hamming", value_parser = parse_loss)]
    loss: LossKind,
    #[arg(long, default_value = "best-first", value_parser = parse_optimizer)]
    optimizer: OptimizerKind,
    /// Total search time in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Time limit per candidate evaluation in seconds.
    #[arg(long, default_value_t = 10.0)]
    eval_timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    completions: usize,
    #[arg(long, default_value = "min", value_parser = parse_aggregation)]
    aggregation: Aggregation,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Stop after this many evaluation attempts.
    #[arg(long)]
    max_evals: Option<usize>,
    /// Holdout repeats per candidate evaluation.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long)]
    no_guard: bool,
    #[arg(long, default_value_t = 2)]
    eta: usize,
    #[arg(long, default_value_t = 0.125)]
    b_min: f64,
    #[arg(long, default_value_t = 8)]
    sh_candidates: usize,
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Component tree as inline JSON or a path to a JSON file.
    #[arg(long)]
    pipeline: String,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "hamming", value_parser = parse_loss)]
    loss: LossKind,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0.7)]
    train_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60.0)]
    eval_timeout: f64,
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(clap::Args)]
struct LossesArgs {
    /// 0/1 ground-truth matrix, one row per line.
    #[arg(long)]
    truth: PathBuf,
    /// 0/1 predictions or scores in [0, 1].
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, value_parser = parse_synth)]
    kind: SynthKind,
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long, default_value_t = 10)]
    features: usize,
    #[arg(long, default_value_t = 3)]
    labels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "suffix")]
    label_pos: LabelPos,
    #[arg(long)]
    out: PathBuf,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|e: mlcsearch::losses::LossError| e.to_string())
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    OptimizerKind::from_name(s).ok_or_else(|| format!("unknown optimizer '{s}' (best-first, random, sh, hyperband)"))
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    match s {
        "min" => Ok(Aggregation::Min),
        "mean" => Ok(Aggregation::Mean),
        _ => Err(format!("unknown aggregation '{s}' (min, mean)")),
    }
}

fn parse_synth(s: &str) -> Result<SynthKind, String> {
    SynthKind::from_name(s).ok_or_else(|| format!("unknown generator '{s}' (blobs, xor-dependence, copy-label)"))
}

/// A fault reported as one JSON line on stderr with exit code 1.
#[derive(Debug, Serialize)]
struct Failure {
    error: &'static str,
    message: String,
}

fn fail(error: &'static str, message: impl ToString) -> Failure {
    Failure {
        error,
        message: message.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Losses(args) => cmd_losses(&args),
        Command::Bayes { dist } => cmd_bayes(&dist),
        Command::Space { action, registry } => cmd_space(action, registry.as_deref()),
        Command::Synth(args) => cmd_synth(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", serde_json::to_string(&f).expect("failure serializes"));
            ExitCode::from(1)
        }
    }
}

fn load_data(args: &DataArgs) -> Result<Dataset, Failure> {
    if !args.data.exists() {
        return Err(fail("data", format!("missing file: {}", args.data.display())));
    }
    match args.format {
        Format::Arff => load_meka_arff(&args.data),
        Format::Csv => {
            let k = args
                .labels
                .ok_or_else(|| fail("config", "--labels is required for CSV input"))?;
            load_csv(&args.data, k, args.label_pos.into())
        }
    }
    .map_err(|e| fail("data", e))
}

fn load_registry_arg(path: Option<&Path>) -> Result<ComponentRegistry, Failure> {
    match path {
        None => Ok(builtin_registry()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| fail("config", format!("{}: {e}", p.display())))?;
            load_registry(&text).map_err(|e| fail("config", e))
        }
    }
}

fn loss_map(table: &LossTable) -> serde_json::Map<String, serde_json::Value> {
    LossKind::CANONICAL
        .iter()
        .map(|k| (k.name(), table.get(*k).expect("canonical kind").into()))
        .collect()
}

/// Sidecar path for the JSON-lines trace: `result.json` becomes
/// `result.trace.jsonl`.
fn trace_path(out: &Path) -> PathBuf {
    out.with_extension("trace.jsonl")
}

#[derive(Serialize)]
struct RunResult<'a> {
    status: OptStatus,
    config: &'a RunArgs,
    best: Option<ComponentInstance>,
    search_loss: Option<f64>,
    test_losses: Option<serde_json::Map<String, serde_json::Value>>,
    test_label_density: f64,
    evaluated: usize,
    n_search: usize,
    n_test: usize,
    elapsed_ms: f64,
    trace: Vec<TraceEvent>,
}

fn cmd_run(args: &RunArgs) -> Result<u8, Failure> {
    let start = Instant::now();
    if args.timeout.is_nan() || args.timeout < 0.0 || args.eval_timeout.is_nan() || args.eval_timeout <= 0.0 {
        return Err(fail("config", "timeouts must be non-negative"));
    }
    if !(0.0..=1.0).contains(&args.tau) {
        return Err(fail("config", "tau must lie in [0, 1]"));
    }
    let registry = load_registry_arg(args.registry.as_deref())?;
    let ds = load_data(&args.data)?;
    let (search_rows, test_rows) = outer_split(&ds, args.seed).map_err(|e| fail("data", e))?;
    let search = ds.select_rows(&search_rows);
    let test = ds.select_rows(&test_rows);

    let settings = EvalSettings {
        loss: args.loss,
        timeout_s: args.eval_timeout,
        tau: args.tau,
        seed: args.seed,
    };
    let mut evaluator =
        PipelineEvaluator::new(registry.clone(), search.clone(), settings).with_split(0.7, args.repeats);
    if !args.no_guard {
        evaluator = evaluator.with_guard(GuardConfig::default());
    }
    let cfg = OptConfig {
        time_budget_s: args.timeout,
        max_evaluations: args.max_evals,
        n_completions: args.completions,
        aggregation: args.aggregation,
        workers: args.workers,
        seed: args.seed,
        halving: HalvingConfig {
            eta: args.eta,
            b_min: args.b_min,
            b_max: 1.0,
            candidates: args.sh_candidates,
        },
        ..OptConfig::default()
    };

    let sidecar = trace_path(&args.out);
    let file = fs::File::create(&sidecar).map_err(|e| fail("io", format!("{}: {e}", sidecar.display())))?;
    let mut lines = BufWriter::new(file);
    let mut sink = |event: &TraceEvent| {
        if let Ok(line) = serde_json::to_string(event) {
            let _ = writeln!(lines, "{line}");
            let _ = lines.flush();
        }
    };
    let result =
        run_optimizer(args.optimizer, &registry, &evaluator, &cfg, &mut sink).map_err(|e| fail("search", e))?;

    let test_losses = match &result.best {
        Some(best) => Some(test_losses(best, &registry, &search, &test, &settings)?),
        None => None,
    };
    let out = RunResult {
        status: result.status,
        config: args,
        best: result.best.clone(),
        search_loss: result.best_loss,
        test_losses,
        test_label_density: label_stats(&test).density,
        evaluated: result.evaluated,
        n_search: search.n_rows(),
        n_test: test.n_rows(),
        elapsed_ms: start.elapsed().as_secs_f64() * 1000.0,
        trace: result.trace,
    };
    let text = serde_json::to_string_pretty(&out).expect("result serializes");
    fs::write(&args.out, text + "\n").map_err(|e| fail("io", format!("{}: {e}", args.out.display())))?;
    println!(
        "status    {}",
        serde_json::to_value(out.status)
            .expect("status serializes")
            .as_str()
            .unwrap_or("")
    );
    println!("evaluated {}", out.evaluated);
    if let Some(best) = &out.best {
        println!("best      {}", best.key());
    }
    for (kind, loss) in out.test_losses.iter().flatten() {
        println!("{kind:<10}{:.6}", loss.as_f64().unwrap_or(f64::NAN));
    }
    Ok(if out.status == OptStatus::Completed { 0 } else { 2 })
}

/// Refits the winner on all search rows and scores the held-out rows.
fn test_losses(
    best: &ComponentInstance,
    registry: &ComponentRegistry,
    search: &Dataset,
    test: &Dataset,
    settings: &EvalSettings,
) -> Result<serde_json::Map<String, serde_json::Value>, Failure> {
    let pipeline = Pipeline::from_instance(best, registry).map_err(|e| fail("search", e))?;
    let fitted = fit_pipeline(
        &pipeline,
        search.features.view(),
        search.labels.view(),
        settings.seed,
        &Deadline::never(),
    )
    .map_err(|e| fail("refit", e))?;
    let (_, hard) = fitted
        .predict(test.features.view(), settings.tau, &Deadline::never())
        .map_err(|e| fail("refit", e))?;
    let table = LossTable::compute(&test.labels, &hard).map_err(|e| fail("refit", e))?;
    Ok(loss_map(&table))
}

fn cmd_eval(args: &EvalArgs) -> Result<u8, Failure> {
    let registry = load_registry_arg(args.registry.as_deref())?;
    let text = if args.pipeline.trim_start().starts_with('{') {
        args.pipeline.clone()
    } else {
        fs::read_to_string(&args.pipeline).map_err(|e| fail("config", format!("{}: {e}", args.pipeline)))?
    };
    let instance: ComponentInstance = serde_json::from_str(&text).map_err(|e| fail("config", e))?;
    let ds = load_data(&args.data)?;
    let mut rows = Vec::new();
    for kind in LossKind::CANONICAL {
        let settings = EvalSettings {
            loss: kind,
            timeout_s: args.eval_timeout,
            tau: args.tau,
            seed: args.seed,
        };
        match mccv(
            &instance,
            &registry,
            &ds,
            args.repeats,
            args.train_ratio,
            args.seed,
            &settings,
        ) {
            Ok(r) => rows.push((kind, r.mean_loss)),
            Err(EvalError::AllRepeatsFailed { records }) => {
                let reason = records[0].failure().unwrap_or_default();
                return Err(fail("evaluation", format!("all repeats failed: {reason}")));
            }
            Err(e) => return Err(fail("data", e)),
        }
    }
    for (kind, loss) in rows {
        let marker = if kind == args.loss { " *" } else { "" };
        println!("{:<10}{loss:.6}{marker}", kind.name());
    }
    Ok(0)
}

/// Numeric matrix with one row per non-empty line; cells separated by
/// commas or whitespace. A first line that does not parse is a header.
fn read_matrix(path: &Path) -> Result<Array2<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| fail("data", format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|c| !c.is_empty())
            .map(str::parse)
            .collect();
        match cells {
            Ok(r) => rows.push(r),
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(_) => {
                return Err(fail(
                    "data",
                    format!("{}: non-numeric cell on line {}", path.display(), i + 1),
                ))
            }
        }
    }
    let width = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
        return Err(fail("data", format!("{}: empty or ragged matrix", path.display())));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, width), rows.concat()).map_err(|e| fail("data", e))
}

fn cmd_losses(args: &LossesArgs) -> Result<u8, Failure> {
    let truth = read_matrix(&args.truth)?;
    let pred = read_matrix(&args.pred)?;
    if truth.dim() != pred.dim() {
        return Err(fail(
            "data",
            format!(
                "shape mismatch: truth {:?} vs predictions {:?}",
                truth.dim(),
                pred.dim()
            ),
        ));
    }
    if truth.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(fail("data", "ground truth must be 0/1"));
    }
    let y = truth.mapv(|v| v as u8);
    let yhat = threshold_scores(&pred, args.tau).map_err(|e| fail("data", e))?;
    let table = LossTable::compute(&y, &yhat).map_err(|e| fail("data", e))?;
    for kind in LossKind::CANONICAL {
        println!("{:<10}{:.6}", kind.name(), table.get(kind).expect("canonical kind"));
    }
    Ok(0)
}

fn format_vector(y: &[u8]) -> String {
    let cells: Vec<String> = y.iter().map(u8::to_string).collect();
    format!("({})", cells.join(","))
}

fn cmd_bayes(path: &Path) -> Result<u8, Failure> {
    let text = fs::read_to_string(path).map_err(|e| fail("data", format!("{}: {e}", path.display())))?;
    let doc: DistributionDocument = serde_json::from_str(&text).map_err(|e| fail("data", e))?;
    if let Some(names) = &doc.labels {
        println!("labels    {}", names.join(","));
    }
    match doc.exact() {
        Some(exact) => {
            let dist = exact.map_err(|e| fail("data", e))?;
            let marg: Vec<String> = marginals(&dist).iter().map(ToString::to_string).collect();
            println!("marginals ({})", marg.join(","));
            for kind in LossKind::CANONICAL {
                let (y, risk) = bayes_optimal(&dist, kind).map_err(|e| fail("data", e))?;
                println!("{:<10}{}  risk {risk}", kind.name(), format_vector(&y));
            }
        }
        None => {
            let dist = doc.float().map_err(|e| fail("data", e))?;
            let marg: Vec<String> = marginals(&dist).iter().map(|q| format!("{q:.6}")).collect();
            println!("marginals ({})", marg.join(","));
            for kind in LossKind::CANONICAL {
                let (y, _) = bayes_optimal(&dist, kind).map_err(|e| fail("data", e))?;
                let risk = expected_loss(&dist, &y, kind).map_err(|e| fail("data", e))?;
                println!("{:<10}{}  risk {risk:.6}", kind.name(), format_vector(&y));
            }
        }
    }
    Ok(0)
}

fn cmd_space(action: SpaceAction, registry: Option<&Path>) -> Result<u8, Failure> {
    let reg = load_registry_arg(registry)?;
    match action {
        SpaceAction::Dot => print!("{}", export_dag_dot(&reg)),
        SpaceAction::Validate => {
            if !reg.resolvable(mlcsearch::searchspace::ROOT_INTERFACE) {
                return Err(fail("config", "the root interface has no complete derivation"));
            }
            println!(
                "ok: {} components, {} interfaces, {} edges",
                reg.components.len(),
                reg.interfaces().len(),
                reg.edge_count()
            );
        }
        SpaceAction::Show => {
            println!("max_depth {}  max_recursion {}", reg.max_depth, reg.max_recursion);
            for c in &reg.components {
                let slots: Vec<String> = c
                    .requires
                    .iter()
                    .map(|s| format!("{}: {}", s.slot, s.interface))
                    .collect();
                let params: Vec<&str> = c.params.iter().map(|p| p.name.as_str()).collect();
                println!(
                    "{:<20} provides [{}]  slots [{}]  params [{}]",
                    c.name,
                    c.provides.join(", "),
                    slots.join(", "),
                    params.join(", ")
                );
            }
            for f in &reg.forbid {
                println!("forbid {} -> {}", f.outer, f.inner);
            }
        }
    }
    Ok(0)
}

fn cmd_synth(args: &SynthArgs) -> Result<u8, Failure> {
    let ds = generate(args.kind, args.rows, args.features, args.labels, args.seed).map_err(|e| fail("config", e))?;
    write_csv(&ds, &args.out, args.label_pos.into()).map_err(|e| fail("io", e))?;
    Ok(0)
}
