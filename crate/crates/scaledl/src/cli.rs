//! Command-line workflow: dataset generation, benchmark design, per-layer
//! and refiner training, prediction, evaluation, ablation, and
//! communication calibration.
//!
//! Exit codes: 0 success, 1 usage error (with usage text on stderr),
//! 2 runtime failure (with a stage-tagged message on stderr). Primary
//! outputs are JSON/CSV files or JSON on stdout; progress goes to stderr
//! only when `--verbose` is set, so stdout stays machine-readable.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::comm::load_latency_calibration;
use crate::design::{fedorov_exchange, fedorov_exchange_standardized, DesignProblem};
use crate::layer_cost::ForestParams;
use crate::model_graph::{validate_graph, ModelGraph, RunConfig};
use crate::pipeline::{
    build_training_samples, evaluate, layer_samples_by_kind, load_layer_models,
    predict_with_layer_times, run_ablation, save_layer_models, train_layer_models,
    AblationVariant, EvalReport, PipelineError, PipelineSettings, ABLATION_VARIANTS,
};
use crate::refiner::{model_from_json as gnn_from_json, model_to_json as gnn_to_json, train_gnn, TrainSettings};
use crate::synth::{
    collect_dataset, default_grid, params_from_json, params_to_json, read_dataset,
    subsample_grid, write_dataset, Family, OracleParams, Sampler, FAMILIES,
};

/// Runtime failure carrying the message printed to stderr before exit 2.
#[derive(Debug)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! from_error {
    ($($ty:ty),+) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> CliError {
                CliError(e.to_string())
            }
        }
    )+};
}

from_error!(
    crate::comm::CommError,
    crate::design::DesignError,
    crate::layer_cost::LayerCostError,
    crate::model_graph::GraphError,
    crate::pipeline::PipelineError,
    crate::refiner::RefinerError,
    crate::synth::SynthError,
    std::io::Error,
    serde_json::Error,
    csv::Error
);

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "scaledl",
    version,
    about = "Runtime prediction for distributed DNN training",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// RNG seed; falls back to SCALEDL_SEED, then 0.
    #[arg(long, global = true, env = "SCALEDL_SEED", default_value_t = 0)]
    seed: u64,
    /// Stage-tagged progress on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    /// Worker-thread cap for forest fitting; results are identical at any
    /// count.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic benchmark dataset from the built-in oracle.
    Gen(GenArgs),
    /// Select an information-optimal benchmark subset from candidate rows.
    Design(DesignArgs),
    /// Fit per-layer-kind cost models from an instrumented dataset.
    TrainLayer(TrainLayerArgs),
    /// Train the graph refiner on top of fitted layer models.
    TrainGnn(TrainGnnArgs),
    /// Predict the per-epoch runtime of one workload.
    Predict(PredictArgs),
    /// Compute error metrics from prediction and measurement files.
    Eval(EvalArgs),
    /// Run ablation variants over a dataset and report their metrics.
    Ablate(AblateArgs),
    /// Estimate network latency from a calibration measurement file.
    CalibrateComm(CalibrateCommArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SamplerArg {
    Full,
    Random,
    DOptimal,
}

impl From<SamplerArg> for Sampler {
    fn from(s: SamplerArg) -> Sampler {
        match s {
            SamplerArg::Full => Sampler::Full,
            SamplerArg::Random => Sampler::Random,
            SamplerArg::DOptimal => Sampler::DOptimal,
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output directory; receives dataset.csv, graphs/, oracle_params.json.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated family tags, or "all".
    #[arg(long, value_delimiter = ',', default_value = "all")]
    families: Vec<String>,
    /// Sweep points kept per family (0 keeps the full grid).
    #[arg(long, default_value_t = 48)]
    grid_size: usize,
    /// How to pick measured configurations from the sweep grid.
    #[arg(long, value_enum, default_value_t = SamplerArg::Full)]
    sampler: SamplerArg,
    /// Measurement budget per family; required for non-full samplers.
    #[arg(long, required_if_eq_any([("sampler", "random"), ("sampler", "d-optimal")]))]
    budget: Option<usize>,
    /// Oracle parameter JSON; defaults are built in.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DesignArgs {
    /// Candidate CSV: header row, one numeric feature row per candidate.
    #[arg(long)]
    candidates: PathBuf,
    /// Number of rows to select.
    #[arg(long)]
    budget: usize,
    /// Independent exchange restarts.
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    /// Explicit information-matrix ridge (0 = automatic policy).
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Use the rows as given instead of standardizing columns first.
    #[arg(long)]
    raw: bool,
    /// Selection JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainLayerArgs {
    /// Dataset CSV produced by `gen` (or externally, same format).
    #[arg(long)]
    dataset: PathBuf,
    /// Directory receiving one <kind>.json model per layer kind.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    #[arg(long, default_value_t = 2)]
    min_leaf: usize,
}

#[derive(Args, Debug)]
struct TrainGnnArgs {
    /// Dataset CSV with measured iteration times.
    #[arg(long)]
    dataset: PathBuf,
    /// Directory of per-kind layer models (from `train-layer`).
    #[arg(long)]
    layer_models: PathBuf,
    /// Output model JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Optional epoch-by-epoch loss CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// Fraction of samples held out for validation.
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Drop the global-context encoder branch.
    #[arg(long)]
    no_global_encoder: bool,
    /// Train with the communication term forced to zero.
    #[arg(long)]
    zero_comm: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model graph JSON.
    #[arg(long)]
    graph: PathBuf,
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Directory of per-kind layer models.
    #[arg(long)]
    layer_models: PathBuf,
    /// Refiner JSON; omitting it predicts with alpha = beta = 1.
    #[arg(long)]
    gnn: Option<PathBuf>,
    /// Prediction JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional per-node predicted times CSV.
    #[arg(long)]
    layer_times: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Predictions, one number per line.
    #[arg(long)]
    predictions: PathBuf,
    /// Measured values, one number per line, same order.
    #[arg(long)]
    actuals: PathBuf,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV of sorted per-sample errors with cumulative fractions.
    #[arg(long)]
    cdf: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// Dataset CSV with measured times.
    #[arg(long)]
    dataset: PathBuf,
    /// Training-measurement budget handed to the selector.
    #[arg(long)]
    budget: usize,
    /// Comma-separated variant tags, or "all".
    #[arg(long, value_delimiter = ',', default_value = "all")]
    variants: Vec<String>,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Held-out fraction of the dataset.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
}

#[derive(Args, Debug)]
struct CalibrateCommArgs {
    /// Calibration JSON with latency_samples_s (and optional bandwidth_bps).
    #[arg(long)]
    samples: PathBuf,
    /// Calibrated parameters JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` and runs one subcommand, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let progress = |stage: &str, msg: &str| {
        if cli.verbose {
            eprintln!("[{stage}] {msg}");
        }
    };
    match &cli.command {
        Command::Gen(args) => cmd_gen(cli, args, &progress),
        Command::Design(args) => cmd_design(cli, args, &progress),
        Command::TrainLayer(args) => cmd_train_layer(cli, args, &progress),
        Command::TrainGnn(args) => cmd_train_gnn(cli, args, &progress),
        Command::Predict(args) => cmd_predict(cli, args, &progress),
        Command::Eval(args) => cmd_eval(cli, args, &progress),
        Command::Ablate(args) => cmd_ablate(cli, args, &progress),
        Command::CalibrateComm(args) => cmd_calibrate_comm(cli, args, &progress),
    }
}

/// Prints a line to stdout; a closed pipe (e.g. `scaledl ... | head`) is
/// treated as success rather than a panic.
fn print_stdout(text: &str) -> CliResult<()> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

/// Writes `text` to `out` when given, otherwise prints it to stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            let mut body = text.to_string();
            if !body.ends_with('\n') {
                body.push('\n');
            }
            std::fs::write(path, body)?;
            Ok(())
        }
        None => print_stdout(text),
    }
}

fn pretty_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn cmd_gen(cli: &Cli, args: &GenArgs, progress: &dyn Fn(&str, &str)) -> CliResult<()> {
    let params = match &args.params {
        Some(path) => params_from_json(&std::fs::read_to_string(path)?)?,
        None => OracleParams::default(),
    };
    params.validate()?;
    let families: Vec<Family> = if args.families.iter().any(|f| f == "all") {
        FAMILIES.to_vec()
    } else {
        args.families.iter().map(|f| Family::from_tag(f)).collect::<Result<_, _>>()?
    };
    let mut samples = Vec::new();
    for &family in &families {
        let mut grid = default_grid(family);
        if args.grid_size > 0 && args.grid_size < grid.len() {
            let grid_seed =
                crate::rng::fingerprint(&format!("gen-grid|{}|{}", family.tag(), cli.seed));
            grid = subsample_grid(&grid, args.grid_size, grid_seed);
        }
        let family_seed = crate::rng::fingerprint(&format!("gen|{}|{}", family.tag(), cli.seed));
        let collected = collect_dataset(
            &grid,
            args.sampler.into(),
            args.budget.unwrap_or(0),
            family_seed,
            &params,
        )?;
        progress("gen", &format!("{}: {} samples", family.tag(), collected.len()));
        samples.extend(collected);
    }
    std::fs::create_dir_all(&args.out)?;
    let csv_path = write_dataset(&samples, &args.out)?;
    let params_path = args.out.join("oracle_params.json");
    std::fs::write(&params_path, params_to_json(&params))?;
    let summary = serde_json::json!({
        "csv": csv_path,
        "samples": samples.len(),
        "families": families.iter().map(|f| f.tag()).collect::<Vec<_>>(),
        "oracle_params": params_path,
    });
    print_stdout(&serde_json::to_string_pretty(&summary)?)
}

/// Reads a numeric CSV: a header row (ignored beyond establishing width)
/// followed by one f64 row per candidate.
fn read_candidates(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row: Vec<f64> = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.trim().parse::<f64>().map_err(|_| {
                    CliError(format!(
                        "{}: row {}, column {}: {field:?} is not a number",
                        path.display(),
                        i + 2,
                        col + 1
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError(format!("{}: no candidate rows", path.display())));
    }
    Ok(rows)
}

fn cmd_design(cli: &Cli, args: &DesignArgs, progress: &dyn Fn(&str, &str)) -> CliResult<()> {
    let candidates = read_candidates(&args.candidates)?;
    progress(
        "design",
        &format!("{} candidates x {} columns", candidates.len(), candidates[0].len()),
    );
    let problem =
        DesignProblem { candidates, budget: args.budget, ridge: args.ridge };
    let selection = if args.raw {
        fedorov_exchange(&problem, args.restarts, cli.seed)?
    } else {
        fedorov_exchange_standardized(&problem, args.restarts, cli.seed)?
    };
    progress(
        "design",
        &format!("log_det {} after {} swaps", selection.log_det, selection.iterations),
    );
    emit(&args.out, &pretty_json(&selection)?)
}

fn forest_params(cli: &Cli, trees: usize, max_depth: usize, min_leaf: usize) -> ForestParams {
    ForestParams {
        n_trees: trees,
        max_depth,
        min_samples_leaf: min_leaf,
        threads: cli.threads.max(1),
        ..ForestParams::default()
    }
}

fn cmd_train_layer(cli: &Cli, args: &TrainLayerArgs, progress: &dyn Fn(&str, &str)) -> CliResult<()> {
    let samples = read_dataset(&args.dataset)?;
    progress("stage 1", &format!("{} workload samples", samples.len()));
    let counts: BTreeMap<String, usize> = layer_samples_by_kind(&samples)?
        .into_iter()
        .map(|(kind, v)| (kind.as_str().to_string(), v.len()))
        .collect();
    let params = forest_params(cli, args.trees, args.max_depth, args.min_leaf);
    let models = train_layer_models(&samples, &params, cli.seed)?;
    save_layer_models(&models, &args.out)?;
    progress("stage 1", &format!("fitted {} kind models", models.len()));
    let summary = serde_json::json!({
        "out": args.out,
        "layer_samples_per_kind": counts,
        "trees": args.trees,
    });
    print_stdout(&serde_json::to_string_pretty(&summary)?)
}

fn training_log_csv(log: &[crate::refiner::EpochLog]) -> String {
    let mut text = String::from("epoch,train_loss,val_loss,learning_rate\n");
    for row in log {
        let val = row.val_loss.map(|v| format!("{v:?}")).unwrap_or_default();
        text.push_str(&format!(
            "{},{:?},{},{:?}\n",
            row.epoch, row.train_loss, val, row.learning_rate
        ));
    }
    text
}

fn cmd_train_gnn(cli: &Cli, args: &TrainGnnArgs, progress: &dyn Fn(&str, &str)) -> CliResult<()> {
    if !(0.0..1.0).contains(&args.val_fraction) {
        return Err(CliError(format!(
            "--val-fraction must be in [0, 1), got {}",
            args.val_fraction
        )));
    }
    let samples = read_dataset(&args.dataset)?;
    let models = load_layer_models(&args.layer_models)?;
    progress("stage 3", &format!("building refiner inputs for {} samples", samples.len()));
    let train_samples = build_training_samples(&samples, &models, args.zero_comm)?;
    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut crate::rng::stream(cli.seed, "train-gnn-split"));
    let n_val = ((train_samples.len() as f64 * args.val_fraction).round() as usize)
        .min(train_samples.len().saturating_sub(1));
    let val: Vec<_> = order[..n_val].iter().map(|&i| train_samples[i].clone()).collect();
    let train: Vec<_> = order[n_val..].iter().map(|&i| train_samples[i].clone()).collect();
    let settings = TrainSettings {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        use_global_encoder: !args.no_global_encoder,
        ..TrainSettings::default()
    };
    progress("stage 3", &format!("training on {} samples, validating on {}", train.len(), val.len()));
    let outcome = train_gnn(&train, &val, &settings, cli.seed)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, gnn_to_json(&outcome.model))?;
    if let Some(log_path) = &args.log {
        emit(&Some(log_path.clone()), &training_log_csv(&outcome.log))?;
    }
    let last = outcome.log.last();
    let summary = serde_json::json!({
        "model": args.out,
        "epochs_run": outcome.log.len(),
        "final_train_loss": last.map(|l| l.train_loss),
        "final_val_loss": last.and_then(|l| l.val_loss),
    });
    print_stdout(&serde_json::to_string_pretty(&summary)?)
}

fn cmd_predict(cli: &Cli, args: &PredictArgs, progress: &dyn Fn(&str, &str)) -> CliResult<()> {
    let _ = cli;
    let graph: ModelGraph = serde_json::from_str(&std::fs::read_to_string(&args.graph)?)?;
    validate_graph(&graph)?;
    let cfg: RunConfig = serde_json::from_str(&std::fs::read_to_string(&args.config)?)?;
    let models = load_layer_models(&args.layer_models)?;
    let gnn = match &args.gnn {
        Some(path) => Some(gnn_from_json(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    progress("predict", &format!("{}: {} nodes", graph.name, graph.nodes.len()));
    let (prediction, layer_times) =
        predict_with_layer_times(&graph, &cfg, &models, gnn.as_ref(), false)?;
    if let Some(path) = &args.layer_times {
        let mut text = String::from("node_id,predicted_time_s\n");
        for (node, t) in &layer_times {
            text.push_str(&format!("{node},{t:?}\n"));
        }
        emit(&Some(path.clone()), &text)?;
    }
    emit(&args.out, &pretty_json(&prediction)?)
}

/// Reads one finite f64 per non-empty line.
fn read_numbers(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            CliError(format!("{}: line {}: {line:?} is not a number", path.display(), i + 1))
        })?;
        values.push(v);
    }
    Ok(values)
}

fn cmd_eval(cli: &Cli, args: &EvalArgs, progress: &dyn Fn(&str, &str)) -> CliResult<()> {
    let _ = cli;
    let predictions = read_numbers(&args.predictions)?;
    let actuals = read_numbers(&args.actuals)?;
    let report = evaluate(&predictions, &actuals).map_err(|e| match e {
        PipelineError::LengthMismatch { predictions: p, actuals: a } => CliError(format!(
            "length mismatch between {} ({p} values) and {} ({a} values)",
            args.predictions.display(),
            args.actuals.display()
        )),
        other => CliError(other.to_string()),
    })?;
    progress("eval", &format!("n={} mre={}% rmse={}", report.n, report.mre_pct, report.rmse));
    if let Some(cdf_path) = &args.cdf {
        let mut sorted = report.per_sample_abs_pct_error.clone();
        sorted.sort_by(f64::total_cmp);
        let mut text = String::from("abs_pct_error,cum_fraction\n");
        for (i, err) in sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / sorted.len() as f64;
            text.push_str(&format!("{err:?},{frac:?}\n"));
        }
        emit(&Some(cdf_path.clone()), &text)?;
    }
    emit(&args.out, &pretty_json(&report)?)
}

#[derive(serde::Serialize)]
struct AblationRow {
    variant: String,
    #[serde(flatten)]
    report: EvalReport,
}

fn cmd_ablate(cli: &Cli, args: &AblateArgs, progress: &dyn Fn(&str, &str)) -> CliResult<()> {
    let variants: Vec<AblationVariant> = if args.variants.iter().any(|v| v == "all") {
        ABLATION_VARIANTS.to_vec()
    } else {
        args.variants
            .iter()
            .map(|v| AblationVariant::from_tag(v))
            .collect::<Result<_, _>>()?
    };
    let dataset = read_dataset(&args.dataset)?;
    let settings = PipelineSettings {
        test_fraction: args.test_fraction,
        forest: forest_params(cli, args.trees, 12, 2),
        gnn: TrainSettings { epochs: args.epochs, ..TrainSettings::default() },
        ..PipelineSettings::default()
    };
    let mut rows = Vec::with_capacity(variants.len());
    for variant in variants {
        progress("ablate", &format!("running {variant}"));
        let report = run_ablation(variant, &dataset, args.budget, cli.seed, &settings)?;
        progress(
            "ablate",
            &format!("{variant}: mre={}% rmse={}", report.mre_pct, report.rmse),
        );
        rows.push(AblationRow { variant: variant.tag().to_string(), report });
    }
    emit(&args.out, &pretty_json(&rows)?)
}

fn cmd_calibrate_comm(
    cli: &Cli,
    args: &CalibrateCommArgs,
    progress: &dyn Fn(&str, &str),
) -> CliResult<()> {
    let _ = cli;
    let calibrated = load_latency_calibration(&std::fs::read_to_string(&args.samples)?)?;
    progress(
        "stage 2",
        &format!("median latency {}s over {} samples", calibrated.latency_s, calibrated.n_samples),
    );
    emit(&args.out, &pretty_json(&calibrated)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parser_accepts_every_subcommand_help() {
        for sub in [
            "gen",
            "design",
            "train-layer",
            "train-gnn",
            "predict",
            "eval",
            "ablate",
            "calibrate-comm",
        ] {
            let err = Cli::try_parse_from(["scaledl", sub, "--help"]).unwrap_err();
            assert_eq!(err.kind(), ErrorKind::DisplayHelp, "{sub}");
            let text = err.to_string();
            assert!(text.contains("--seed"), "{sub} help lists global --seed:\n{text}");
        }
    }

    #[test]
    fn missing_required_flag_is_a_usage_error() {
        let err = Cli::try_parse_from(["scaledl", "predict", "--graph", "g.json"]).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::MissingRequiredArgument);
        let err = Cli::try_parse_from(["scaledl", "gen", "--out", "d", "--sampler", "random"])
            .unwrap_err();
        assert_eq!(err.kind(), ErrorKind::MissingRequiredArgument, "budget required: {err}");
    }

    #[test]
    fn seed_falls_back_to_environment_then_zero() {
        let cli = Cli::try_parse_from(["scaledl", "eval", "--predictions", "p", "--actuals", "a"])
            .unwrap();
        assert_eq!(cli.seed, 0);
        let cli = Cli::try_parse_from([
            "scaledl", "eval", "--predictions", "p", "--actuals", "a", "--seed", "9",
        ])
        .unwrap();
        assert_eq!(cli.seed, 9);
    }

    #[test]
    fn number_file_parsing_reports_path_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("values.txt");
        std::fs::write(&path, "1.5\n\n2.5\n").unwrap();
        assert_eq!(read_numbers(&path).unwrap(), vec![1.5, 2.5]);
        std::fs::write(&path, "1.5\nnope\n").unwrap();
        let err = read_numbers(&path).unwrap_err();
        assert!(err.0.contains("line 2"), "{err}");
        assert!(err.0.contains("values.txt"), "{err}");
    }

    #[test]
    fn candidate_csv_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "x,y\n1,2\n3,4\n").unwrap();
        assert_eq!(read_candidates(&path).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        std::fs::write(&path, "x,y\n1,oops\n").unwrap();
        let err = read_candidates(&path).unwrap_err();
        assert!(err.0.contains("row 2"), "{err}");
    }
}
