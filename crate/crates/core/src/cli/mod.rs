//! Command-line front end: `train`, `predict`, `cv`, `encode` and `inspect`.
//!
//! Settings are resolved as flags, then the `--config` TOML file, then
//! built-in defaults. Every failure prints one line of the form
//! `satrules: error[usage]: ...` or `satrules: error[runtime]: ...` to
//! standard error and exits with 2 or 1 respectively.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::data::{load_csv, ColumnKind, DiscretizationMode, RawDataset};
use crate::encoder::{encode_query, EncodeConfig, VarMap};
use crate::eval::{default_grid, grid, k_fold_cv, lambda_grid, GRID_BATCH_SIZES};
use crate::formula::{load_model, save_model, Model};
use crate::learner::{self, status_counts, Hyperparams, Mode, Prune, Strategy};
use crate::solver::{Backend, Polarity};
use crate::Error;

/// Environment variable naming an external solver command.
pub const SOLVER_ENV: &str = "SATRULES_SOLVER";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "satrules",
    version,
    about = "Learn sparse rule classifiers with MaxSAT"
)]
pub struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier and save it.
    Train(TrainArgs),
    /// Apply a saved model to a CSV file.
    Predict(PredictArgs),
    /// Cross-validate over a hyperparameter grid.
    Cv(CvArgs),
    /// Dump the MaxSAT query for a dataset as WDIMACS.
    Encode(EncodeArgs),
    /// Print a saved model.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Learn this class against all others.
    #[arg(long)]
    pub positive: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct HyperArgs {
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// `closed` (interval features) or `open` (threshold features).
    #[arg(long)]
    pub discretization: Option<String>,
    #[arg(long)]
    pub negations: Option<bool>,
    #[arg(long)]
    pub eliminate: Option<bool>,
    /// `off`, `each-batch` or `at-end`.
    #[arg(long)]
    pub prune: Option<String>,
    /// `brute-force`, `branch-and-bound` or `external`.
    #[arg(long)]
    pub solver: Option<String>,
    /// External solver command; the query file path is appended.
    #[arg(long)]
    pub solver_cmd: Option<String>,
    /// Seconds per solver call.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Branching budget of the built-in solver; 0 means unlimited.
    #[arg(long)]
    pub node_limit: Option<u64>,
    #[arg(long)]
    pub precision: Option<u64>,
    /// `occurrence` or `false`.
    #[arg(long)]
    pub polarity: Option<String>,
    /// Shuffle rows before batching with this seed.
    #[arg(long)]
    pub shuffle: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Where the model is written.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Per-batch CSV report; defaults to `<model>.report.csv`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// One label per row; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Comma-separated clause counts; default 1,2,3,4,5.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Comma-separated lambdas; default five log-spaced values in [1e-4, 10].
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Comma-separated batch sizes; default 50,100,200,400.
    #[arg(long, value_delimiter = ',')]
    pub batch_sizes: Option<Vec<usize>>,
    /// Write the per-fold CSV here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// WDIMACS file; the variable map goes to `<output>.varmap`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub positive: Option<String>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub mode: Option<String>,
    pub strategy: Option<String>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub batch_size: Option<usize>,
    pub rounds: Option<usize>,
    pub bins: Option<usize>,
    pub discretization: Option<String>,
    pub negations: Option<bool>,
    pub eliminate: Option<bool>,
    pub prune: Option<String>,
    pub solver: Option<String>,
    pub solver_cmd: Option<String>,
    pub timeout: Option<f64>,
    pub node_limit: Option<u64>,
    pub precision: Option<u64>,
    pub polarity: Option<String>,
    pub shuffle: Option<u64>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub ks: Option<Vec<usize>>,
    pub lambdas: Option<Vec<f64>>,
    pub batch_sizes: Option<Vec<usize>>,
    /// Column kind overrides: `binary`, `continuous` or `categorical`.
    #[serde(default)]
    pub columns: HashMap<String, ColumnKind>,
    /// Value of [`SOLVER_ENV`], filled in by the caller rather than the file.
    #[serde(skip)]
    pub solver_env: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {}", path.display(), e.message())))
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    /// The single line printed to standard error.
    pub fn line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m.clone()),
            CliError::Runtime(e) => ("runtime", e.to_string()),
        };
        let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("satrules: error[{kind}]: {msg}")
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(m) => CliError::Usage(m),
            e => CliError::Runtime(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

fn parse<T: FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(CliError::from)
}

fn parse_polarity(s: &str) -> CliResult<Polarity> {
    match s {
        "occurrence" => Ok(Polarity::Occurrence),
        "false" => Ok(Polarity::False),
        _ => Err(CliError::Usage(format!("unknown polarity `{s}`"))),
    }
}

/// Picks the backend. An explicit `solver` wins; otherwise a command from
/// the flags, the config or the environment selects the external bridge.
fn resolve_backend(
    solver: Option<&str>,
    cmd: Option<String>,
    env: Option<&str>,
) -> CliResult<Backend> {
    let cmd = cmd.or_else(|| env.filter(|c| !c.trim().is_empty()).map(str::to_string));
    match solver {
        Some("brute-force") => Ok(Backend::BruteForce),
        Some("branch-and-bound") => Ok(Backend::BranchAndBound),
        Some("external") => cmd.map(Backend::External).ok_or_else(|| {
            CliError::Usage(format!(
                "--solver external needs --solver-cmd or {SOLVER_ENV}"
            ))
        }),
        Some(other) => Err(CliError::Usage(format!("unknown solver `{other}`"))),
        None => Ok(cmd.map_or(Backend::BranchAndBound, Backend::External)),
    }
}

/// Merges flags over the config file over the defaults.
pub fn resolve_hyperparams(flags: &HyperArgs, file: &FileConfig) -> CliResult<Hyperparams> {
    let d = Hyperparams::default();
    let mut hp = Hyperparams {
        k: flags.k.or(file.k).unwrap_or(d.k),
        lambda: flags.lambda.or(file.lambda).unwrap_or(d.lambda),
        batch_size: flags.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        rounds: flags.rounds.or(file.rounds).unwrap_or(d.rounds),
        bins: flags.bins.or(file.bins).unwrap_or(d.bins),
        negations: flags.negations.or(file.negations).unwrap_or(d.negations),
        eliminate: flags.eliminate.or(file.eliminate).unwrap_or(d.eliminate),
        precision: flags.precision.or(file.precision).unwrap_or(d.precision),
        shuffle: flags.shuffle.or(file.shuffle),
        seed: flags.seed.or(file.seed).unwrap_or(d.seed),
        ..d
    };
    if let Some(s) = flags.mode.as_ref().or(file.mode.as_ref()) {
        hp.mode = parse::<Mode>(s)?;
    }
    if let Some(s) = flags.strategy.as_ref().or(file.strategy.as_ref()) {
        hp.strategy = parse::<Strategy>(s)?;
    }
    if let Some(s) = flags
        .discretization
        .as_ref()
        .or(file.discretization.as_ref())
    {
        hp.discretization = parse::<DiscretizationMode>(s)?;
    }
    if let Some(s) = flags.prune.as_ref().or(file.prune.as_ref()) {
        hp.prune = parse::<Prune>(s)?;
    }
    if let Some(s) = flags.polarity.as_ref().or(file.polarity.as_ref()) {
        hp.polarity = parse_polarity(s)?;
    }
    if let Some(limit) = flags.node_limit.or(file.node_limit) {
        hp.node_limit = (limit > 0).then_some(limit);
    }
    if let Some(secs) = flags.timeout.or(file.timeout) {
        if !(secs.is_finite() && secs >= 0.0) {
            return Err(CliError::Usage(format!(
                "timeout must be non-negative, got {secs}"
            )));
        }
        hp.timeout_per_solve = Some(Duration::from_secs_f64(secs));
    }
    hp.solver = resolve_backend(
        flags.solver.as_deref().or(file.solver.as_deref()),
        flags.solver_cmd.clone().or_else(|| file.solver_cmd.clone()),
        file.solver_env.as_deref(),
    )?;
    hp.validate()?;
    Ok(hp)
}

fn load_data(args: &DataArgs, file: &FileConfig) -> CliResult<RawDataset> {
    let path = required(args.data.clone().or_else(|| file.data.clone()), "data")?;
    let target = required(
        args.target.clone().or_else(|| file.target.clone()),
        "target",
    )?;
    let raw = load_csv(&path, &target, &file.columns)?;
    match args.positive.as_ref().or(file.positive.as_ref()) {
        Some(p) => Ok(raw.one_vs_rest(p)?),
        None => Ok(raw),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(Error::io(path, e)))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_train(args: &TrainArgs, file: &FileConfig) -> CliResult<String> {
    let model_path = required(args.model.clone().or_else(|| file.model.clone()), "model")?;
    let hp = resolve_hyperparams(&args.hyper, file)?;
    let raw = load_data(&args.data, file)?;
    let (model, report) = learner::train_raw(&raw, &hp)?;
    save_model(&model_path, &model)?;
    let report_path = args
        .report
        .clone()
        .or_else(|| file.report.clone())
        .unwrap_or_else(|| with_suffix(&model_path, ".report.csv"));
    write_file(&report_path, &report.to_csv())?;

    let (optimal, best_effort) = status_counts(&report);
    let mut out = String::new();
    let _ = writeln!(out, "{}", model.render());
    let _ = writeln!(out, "classifier: {}", model.classifier.kind_name());
    let _ = writeln!(out, "rule size: {}", report.rule_size);
    let _ = writeln!(out, "training accuracy: {:.4}", report.train_accuracy);
    let _ = writeln!(out, "solves: {optimal} optimal, {best_effort} best-effort");
    for (i, j, count) in &report.overlaps {
        let _ = writeln!(
            out,
            "overlap: rules {} and {} share {count} samples",
            i + 1,
            j + 1
        );
    }
    let _ = writeln!(out, "time: {:.3}s", report.wall_time.as_secs_f64());
    Ok(out)
}

/// Predicted labels for every row of `path`, matching model columns by name.
pub fn predict_file(model: &Model, path: &Path) -> CliResult<Vec<String>> {
    let spec = model.spec.as_ref().ok_or_else(|| {
        CliError::Runtime(Error::InvalidConfig(
            "model has no discretization; it expects binary rows".into(),
        ))
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Runtime(csv_error(path, e)))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Runtime(csv_error(path, e)))?
        .iter()
        .map(str::to_string)
        .collect();
    let positions = spec
        .columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| *h == c.name)
                .ok_or_else(|| CliError::Runtime(Error::MissingColumn(c.name.clone())))
        })
        .collect::<CliResult<Vec<usize>>>()?;

    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Runtime(csv_error(path, e)))?;
        let cells = positions
            .iter()
            .map(|&p| {
                record.get(p).ok_or(Error::RaggedRow {
                    row,
                    expected: header.len(),
                    found: record.len(),
                })
            })
            .collect::<Result<Vec<&str>, Error>>()?;
        let class = learner::predict(model, &cells, row)?;
        labels.push(model.label(class));
    }
    Ok(labels)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Csv(format!("{other:?}")),
    }
}

pub fn cmd_predict(args: &PredictArgs, file: &FileConfig) -> CliResult<String> {
    let data = required(args.data.clone().or_else(|| file.data.clone()), "data")?;
    let model_path = required(args.model.clone().or_else(|| file.model.clone()), "model")?;
    let model = load_model(&model_path)?;
    let mut out = predict_file(&model, &data)?.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    match args.output.clone().or_else(|| file.output.clone()) {
        Some(path) => write_file(&path, &out).map(|()| String::new()),
        None => Ok(out),
    }
}

pub fn cmd_cv(args: &CvArgs, file: &FileConfig) -> CliResult<String> {
    let base = resolve_hyperparams(&args.hyper, file)?;
    let folds = args.folds.or(file.folds).unwrap_or(10);
    if folds < 2 {
        return Err(CliError::Usage(format!(
            "--folds must be at least 2, got {folds}"
        )));
    }
    let ks = args.ks.clone().or_else(|| file.ks.clone());
    let lambdas = args.lambdas.clone().or_else(|| file.lambdas.clone());
    let bss = args
        .batch_sizes
        .clone()
        .or_else(|| file.batch_sizes.clone());
    let points = if ks.is_none() && lambdas.is_none() && bss.is_none() {
        default_grid(&base)
    } else {
        let ks = ks.unwrap_or_else(|| (1..=5).collect());
        let lambdas = lambdas.unwrap_or_else(lambda_grid);
        let bss = bss.unwrap_or_else(|| GRID_BATCH_SIZES.to_vec());
        if ks.is_empty() || lambdas.is_empty() || bss.is_empty() {
            return Err(CliError::Usage("grid overrides must not be empty".into()));
        }
        grid(&base, &ks, &lambdas, &bss)
    };
    for p in &points {
        p.validate()?;
    }
    let raw = load_data(&args.data, file)?;
    let report = k_fold_cv(&raw, &points, folds, base.seed)?;
    let csv = report.to_csv(&points);
    match args.output.clone().or_else(|| file.output.clone()) {
        Some(path) => {
            write_file(&path, &csv)?;
            Ok(report.to_table(&points))
        }
        None => Ok(format!("{csv}\n{}", report.to_table(&points))),
    }
}

/// Variable map sidecar: one line per decision and auxiliary variable.
pub fn render_varmap(vm: &VarMap, feature_names: &[String]) -> String {
    let mut out = String::from("# kind\tindices\tvariable\tmeaning\n");
    for i in 0..vm.k() {
        for (j, name) in feature_names.iter().enumerate().take(vm.m()) {
            let v = vm.feature_var(i, j).id();
            let _ = writeln!(out, "b\t{i} {j}\t{v}\tclause {i} uses {name}");
        }
    }
    for l in 0..vm.n() {
        let _ = writeln!(
            out,
            "eta\t{l}\t{}\tsample {l} misclassified",
            vm.error_var(l).id()
        );
    }
    for l in 0..vm.n() {
        for i in 0..vm.k() {
            if let Some(z) = vm.aux_var(l, i) {
                let _ = writeln!(out, "z\t{l} {i}\t{}\tclause {i} rejects sample {l}", z.id());
            }
        }
    }
    out
}

pub fn cmd_encode(args: &EncodeArgs, file: &FileConfig) -> CliResult<String> {
    let output = required(
        args.output.clone().or_else(|| file.output.clone()),
        "output",
    )?;
    let hp = resolve_hyperparams(&args.hyper, file)?;
    let raw = load_data(&args.data, file)?;
    let (ds, _) = learner::prepare(&raw, &hp)?;
    if !ds.is_binary() {
        return Err(CliError::Runtime(Error::InvalidDataset(format!(
            "encode needs a two-class target, found {} classes; use --positive",
            ds.num_classes()
        ))));
    }
    let cfg = EncodeConfig {
        precision: hp.precision,
        ..EncodeConfig::new(hp.k, hp.lambda)
    };
    let (formula, vm) = encode_query(&ds, &cfg)?;
    write_file(&output, &formula.to_wdimacs())?;
    let names: Vec<String> = ds.descriptors().iter().map(|d| d.name.clone()).collect();
    write_file(
        &with_suffix(&output, ".varmap"),
        &render_varmap(&vm, &names),
    )?;
    Ok(format!(
        "{} variables, {} hard and {} soft clauses\n",
        formula.num_vars(),
        formula.hard().len(),
        formula.soft().len()
    ))
}

pub fn cmd_inspect(args: &InspectArgs, file: &FileConfig) -> CliResult<String> {
    let path = required(args.model.clone().or_else(|| file.model.clone()), "model")?;
    let model = load_model(&path)?;
    let mut out = String::new();
    let _ = writeln!(out, "{}", model.render());
    let _ = writeln!(out, "classifier: {}", model.classifier.kind_name());
    let _ = writeln!(out, "rule size: {}", model.classifier.size());
    for (k, v) in &model.params {
        let _ = writeln!(out, "{k}: {v}");
    }
    Ok(out)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_target(false)
        .try_init();
}

fn dispatch(cli: &Cli, solver_env: Option<String>) -> CliResult<String> {
    let mut file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    file.solver_env = solver_env;
    match &cli.command {
        Command::Train(a) => cmd_train(a, &file),
        Command::Predict(a) => cmd_predict(a, &file),
        Command::Cv(a) => cmd_cv(a, &file),
        Command::Encode(a) => cmd_encode(a, &file),
        Command::Inspect(a) => cmd_inspect(a, &file),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. `solver_env` stands in for [`SOLVER_ENV`].
pub fn run_with<I, T>(
    args: I,
    solver_env: Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            let _ = writeln!(err, "{}", CliError::Usage(first.to_string()).line());
            return EXIT_USAGE;
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli, solver_env) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            let _ = out.flush();
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "{}", e.line());
            e.exit_code()
        }
    }
}

/// [`run_with`] on the real environment and standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(
        args,
        std::env::var(SOLVER_ENV).ok(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

#[cfg(test)]
mod run_tests;
