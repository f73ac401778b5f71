//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data, schema,
//! model-file or I/O error, 3 numeric failure during training or inference.
//!
//! Any flag may also be given in a `--config` file of `key = value` lines,
//! where `key` is the long flag name without dashes (`hidden = 100`,
//! `norm-range = 0,1`, `renormalize-fractions = true`). Flags given on the
//! command line win over the config file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{self, Dataset, LoadOptions, NUM_FEATURES};
use crate::error::Error;
use crate::evaluation::{self, EvalReport};
use crate::model_file::Model;
use crate::report;
use crate::sensitivity::{connection_weights_labeled, SensitivityReport};
use crate::training::{self, AdamConfig, TrainConfig, TrainReport};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const DEFAULT_WIDTHS: &str = "7,16,32,64,100";
const DEFAULT_MODEL_NAME: &str = "model.txt";

#[derive(Debug, Parser)]
#[command(name = "slagcond", version, about = "Slag electrical conductivity regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Preprocess a measurement file and train one network.
    Train,
    /// Print AAE, StDev and RMSE in S/m and write parity.csv.
    Evaluate,
    /// Predict conductivity for each row of a predictor file.
    Predict,
    /// Connection-weights importance of each input.
    Sensitivity,
    /// Train one network per hidden width and keep the best.
    Sweep,
    /// Write histogram, loss curve, parity and importance data.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Predict => "predict",
            Command::Sensitivity => "sensitivity",
            Command::Sweep => "sweep",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormRange {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for NormRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{v}` is not a number"))
        };
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("range [{lo}, {hi}] must satisfy lo < hi"));
        }
        Ok(Self { lo, hi })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Widths(pub Vec<usize>);

impl FromStr for Widths {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|w| {
                w.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("`{w}` is not a width"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Widths)
    }
}

#[derive(Clone, Debug, Default, Args)]
struct Opts {
    /// Measurement CSV (temperature_K,SiO2,CaO,MgO,Al2O3,FeO,conductivity_S_per_m).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Model file to read.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Primary output file (model for train/sweep, predictions for predict).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory for CSV artifacts and the run manifest.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Hidden-layer width.
    #[arg(long, global = true)]
    hidden: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long, global = true)]
    batch: Option<usize>,
    /// Training fraction of the retained samples.
    #[arg(long, global = true)]
    split: Option<f64>,
    /// Min-max target range, `lo,hi`.
    #[arg(long = "norm-range", global = true)]
    norm_range: Option<NormRange>,
    /// Comma-separated hidden widths for `sweep`.
    #[arg(long, global = true)]
    widths: Option<Widths>,
    /// Histogram bin count for `report`.
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Rescale oxide fractions to sum to 1 instead of rejecting the row.
    #[arg(long = "renormalize-fractions", global = true)]
    renormalize_fractions: bool,
    /// Evaluate every row of --data instead of the held-out partition.
    #[arg(long = "full-set", global = true)]
    full_set: bool,
    /// File of `key = value` flag settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Opts {
    fn or(self, other: Opts) -> Opts {
        Opts {
            data: self.data.or(other.data),
            model: self.model.or(other.model),
            out: self.out.or(other.out),
            outdir: self.outdir.or(other.outdir),
            seed: self.seed.or(other.seed),
            hidden: self.hidden.or(other.hidden),
            epochs: self.epochs.or(other.epochs),
            lr: self.lr.or(other.lr),
            batch: self.batch.or(other.batch),
            split: self.split.or(other.split),
            norm_range: self.norm_range.or(other.norm_range),
            widths: self.widths.or(other.widths),
            bins: self.bins.or(other.bins),
            renormalize_fractions: self.renormalize_fractions || other.renormalize_fractions,
            full_set: self.full_set || other.full_set,
            config: self.config,
        }
    }
}

/// Flags after merging the command line, the config file and defaults.
#[derive(Clone, Debug, Serialize)]
struct Settings {
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    out: Option<PathBuf>,
    outdir: PathBuf,
    seed: u64,
    hidden: usize,
    epochs: usize,
    lr: f64,
    batch: usize,
    split: f64,
    norm_range: NormRange,
    widths: Widths,
    bins: usize,
    renormalize_fractions: bool,
    full_set: bool,
    config: Option<PathBuf>,
}

impl Settings {
    fn resolve(opts: Opts) -> Result<Self, CliError> {
        let defaults = TrainConfig::default();
        let outdir = match (&opts.outdir, &opts.out) {
            (Some(dir), _) => dir.clone(),
            (None, Some(out)) => out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
            (None, None) => PathBuf::from("."),
        };
        Ok(Self {
            data: opts.data,
            model: opts.model,
            out: opts.out,
            outdir,
            seed: opts.seed.unwrap_or(defaults.seed),
            hidden: opts.hidden.unwrap_or(defaults.hidden_width),
            epochs: opts.epochs.unwrap_or(defaults.epochs),
            lr: opts.lr.unwrap_or(defaults.adam.learning_rate),
            batch: opts.batch.unwrap_or(defaults.batch_size),
            split: opts.split.unwrap_or(defaults.train_fraction),
            norm_range: opts.norm_range.unwrap_or(NormRange {
                lo: defaults.norm_lo,
                hi: defaults.norm_hi,
            }),
            widths: opts
                .widths
                .unwrap_or_else(|| DEFAULT_WIDTHS.parse().expect("default widths parse")),
            bins: opts.bins.unwrap_or(report::DEFAULT_BINS),
            renormalize_fractions: opts.renormalize_fractions,
            full_set: opts.full_set,
            config: opts.config,
        })
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            seed: self.seed,
            hidden_width: self.hidden,
            norm_lo: self.norm_range.lo,
            norm_hi: self.norm_range.hi,
            train_fraction: self.split,
            adam: AdamConfig {
                learning_rate: self.lr,
                ..AdamConfig::default()
            },
        }
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            renormalize_fractions: self.renormalize_fractions,
        }
    }

    fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        value
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
    }

    fn model_out(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| self.outdir.join(DEFAULT_MODEL_NAME))
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Error::WidthTooSmall { .. } | Error::Config(_) => EXIT_USAGE,
                Error::NumericOverflow(_) | Error::NanLoss { .. } => EXIT_NUMERIC,
                Error::Io { .. }
                | Error::Schema(_)
                | Error::Row { .. }
                | Error::EmptyDataset
                | Error::DegenerateDataset(_)
                | Error::Shape(_)
                | Error::ModelFormat(_) => EXIT_DATA,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let command = cli.command;
    let opts = match cli.opts.config.clone() {
        Some(path) => {
            let from_file = config_opts(command, &path)?;
            cli.opts.or(from_file)
        }
        None => cli.opts,
    };
    let settings = Settings::resolve(opts)?;
    let started = Instant::now();
    let mut run = Run::new(command, settings);
    match command {
        Command::Train => cmd_train(&mut run)?,
        Command::Evaluate => cmd_evaluate(&mut run)?,
        Command::Predict => cmd_predict(&mut run)?,
        Command::Sensitivity => cmd_sensitivity(&mut run)?,
        Command::Sweep => cmd_sweep(&mut run)?,
        Command::Report => cmd_report(&mut run)?,
    }
    run.write_manifest(started.elapsed().as_secs_f64())
}

/// Reads a `key = value` config file by replaying it through the flag parser.
fn config_opts(command: Command, path: &Path) -> Result<Opts, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut argv: Vec<String> = vec!["slagcond".into(), command.name().into()];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected `key = value`", path.display(), n + 1))
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(CliError::Usage(format!(
                "{}:{}: config files cannot include other config files",
                path.display(),
                n + 1
            )));
        }
        if key == "renormalize-fractions" || key == "full-set" {
            match value {
                "true" => argv.push(format!("--{key}")),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "{}:{}: `{key}` expects true or false, got `{other}`",
                        path.display(),
                        n + 1
                    )))
                }
            }
        } else {
            argv.push(format!("--{key}"));
            argv.push(value.to_string());
        }
    }
    Cli::try_parse_from(argv)
        .map(|c| c.opts)
        .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.kind())))
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: Command,
    tool_version: &'static str,
    seed: u64,
    flags: &'a Settings,
    inputs: &'a [InputDigest],
    artifacts: &'a [String],
    wall_clock_seconds: f64,
}

struct Run {
    command: Command,
    settings: Settings,
    inputs: Vec<InputDigest>,
    artifacts: Vec<String>,
}

impl Run {
    fn new(command: Command, settings: Settings) -> Self {
        Self {
            command,
            settings,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = Sha256::digest(&bytes);
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }

    fn record_artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    fn outdir(&self) -> Result<PathBuf, CliError> {
        let dir = self.settings.outdir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn artifact_path(&self, name: &str) -> Result<PathBuf, CliError> {
        Ok(self.outdir()?.join(name))
    }

    fn load_dataset(&mut self) -> Result<Dataset, CliError> {
        let path = self.settings.require(&self.settings.data, "data")?.to_path_buf();
        self.record_input(&path)?;
        Ok(data::load_csv(&path, self.settings.load_options())?)
    }

    fn load_model(&mut self) -> Result<Model, CliError> {
        let path = self.settings.require(&self.settings.model, "model")?.to_path_buf();
        self.record_input(&path)?;
        Ok(Model::load(&path)?)
    }

    fn write_manifest(&mut self, seconds: f64) -> Result<(), CliError> {
        let path = self.artifact_path(&format!("{}.manifest.json", self.command.name()))?;
        let manifest = Manifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: self.settings.seed,
            flags: &self.settings,
            inputs: &self.inputs,
            artifacts: &self.artifacts,
            wall_clock_seconds: seconds,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

/// `m.txt` -> `m.report.json` in the same directory.
pub fn report_path_for(model_path: &Path) -> PathBuf {
    let stem = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    model_path.with_file_name(format!("{stem}.report.json"))
}

fn save_trained(
    run: &mut Run,
    model: &Model,
    report: &TrainReport,
) -> Result<PathBuf, CliError> {
    run.outdir()?;
    let model_path = run.settings.model_out();
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    model.save(&model_path)?;
    run.record_artifact(&model_path);

    let report_path = report_path_for(&model_path);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&report_path, json + "\n").map_err(|e| Error::io(&report_path, e))?;
    run.record_artifact(&report_path);

    let curve = run.artifact_path("loss_curve.csv")?;
    report::write_loss_curve(&curve, &report.loss_per_epoch)?;
    run.record_artifact(&curve);
    Ok(model_path)
}

fn print_metrics(label: &str, r: &EvalReport) {
    println!("{label} (n = {})", r.n);
    println!("  AAE   {:>14.6} S/m", r.aae);
    println!("  StDev {:>14.6} S/m", r.stdev_of_deviation);
    println!("  RMSE  {:>14.6} S/m", r.rmse);
}

fn cmd_train(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.settings.train_config();
    // reject bad widths before touching the data
    cfg.validate(NUM_FEATURES)?;
    let dataset = run.load_dataset()?;
    let (network, scaler, report) = training::train(&dataset, &cfg)?;
    let model = Model::new(network, scaler, cfg.seed, cfg.train_fraction);
    let path = save_trained(run, &model, &report)?;

    println!(
        "trained 6-{}-1 network on {} samples ({} outliers removed, {} held out)",
        cfg.hidden_width, report.train_samples, report.removed_outliers, report.test_samples
    );
    if let (Some(first), Some(last)) = (report.loss_per_epoch.first(), report.loss_per_epoch.last())
    {
        println!(
            "train RMSE (normalized): epoch 1 {:.6e}, epoch {} {:.6e}",
            first.rmse, last.epoch, last.rmse
        );
    }
    print_metrics("test", &report.test);
    println!("model written to {}", path.display());
    Ok(())
}

/// Samples the model is evaluated on: the held-out partition recreated from
/// the model's seed and split fraction, or every row with `--full-set`.
fn evaluation_samples(
    run: &mut Run,
    model: &Model,
) -> Result<(Dataset, Vec<data::Sample>), CliError> {
    let dataset = run.load_dataset()?;
    let samples = if run.settings.full_set {
        dataset.samples.clone()
    } else {
        let (retained, _) = data::remove_outliers(&dataset)?;
        let split = data::split(&retained, model.train_fraction, model.seed)?;
        retained.select(&split.test_indices)
    };
    Ok((dataset, samples))
}

fn cmd_evaluate(run: &mut Run) -> Result<(), CliError> {
    let model = run.load_model()?;
    let (_, samples) = evaluation_samples(run, &model)?;
    let report = evaluation::evaluate(&model.network, &model.scaler, &samples)?;
    let label = if run.settings.full_set { "full set" } else { "held-out test set" };
    print_metrics(label, &report);
    let path = run.artifact_path("parity.csv")?;
    report::write_parity(&path, &report.parity)?;
    run.record_artifact(&path);
    Ok(())
}

fn cmd_predict(run: &mut Run) -> Result<(), CliError> {
    let model = run.load_model()?;
    let input = run.settings.require(&run.settings.data, "data")?.to_path_buf();
    run.record_input(&input)?;
    let rows = data::load_features(&input, run.settings.load_options())?;
    let predictions = evaluation::predict_rows(&model.network, &model.scaler, &rows)?;
    let out = match &run.settings.out {
        Some(p) => p.clone(),
        None => run.artifact_path("predictions.csv")?,
    };
    report::write_predictions(&out, &rows, &predictions)?;
    run.record_artifact(&out);
    println!("{} predictions written to {}", predictions.len(), out.display());
    Ok(())
}

fn print_importance(report: &SensitivityReport) {
    println!("{:<16} {:>14} {:>10}", "input", "contribution", "RI (%)");
    for i in &report.inputs {
        match i.importance_pct {
            Some(p) => println!("{:<16} {:>14.6} {:>10.2}", i.input, i.contribution, p),
            None => println!("{:<16} {:>14.6} {:>10}", i.input, i.contribution, "NaN"),
        }
    }
    if report.is_degenerate() {
        eprintln!("warning: every contribution is zero; relative importances are undefined");
    }
}

fn cmd_sensitivity(run: &mut Run) -> Result<(), CliError> {
    let model = run.load_model()?;
    let report = connection_weights_labeled(&model.network, &model.input_labels);
    print_importance(&report);
    let path = run.artifact_path("importance.csv")?;
    report::write_importance(&path, &report)?;
    run.record_artifact(&path);
    Ok(())
}

fn cmd_sweep(run: &mut Run) -> Result<(), CliError> {
    let widths = run.settings.widths.0.clone();
    let cfg = run.settings.train_config();
    for &w in &widths {
        crate::network::check_min_width(NUM_FEATURES, w)
            .into_result()?;
    }
    let dataset = run.load_dataset()?;
    let outcome = training::sweep(&dataset, &widths, &cfg)?;
    for w in &outcome.duplicates {
        eprintln!("warning: width {w} listed more than once; trained once");
    }
    println!("width,test_aae");
    for row in &outcome.table {
        println!("{},{}", row.width, row.test_aae);
    }
    let table = run.artifact_path("sweep.csv")?;
    report::write_sweep(&table, &outcome.table)?;
    run.record_artifact(&table);

    let model = Model::new(outcome.network, outcome.scaler, cfg.seed, cfg.train_fraction);
    let path = save_trained(run, &model, &outcome.report)?;
    println!(
        "best width {} (test AAE {:.6} S/m) written to {}",
        outcome.best_width,
        outcome.report.test.aae,
        path.display()
    );
    Ok(())
}

fn cmd_report(run: &mut Run) -> Result<(), CliError> {
    let model = run.load_model()?;
    let model_path = run.settings.require(&run.settings.model, "model")?.to_path_buf();
    let (dataset, samples) = evaluation_samples(run, &model)?;

    let (retained, _) = data::remove_outliers(&dataset)?;
    let bins = report::histogram(&retained.conductivities(), run.settings.bins)?;
    let path = run.artifact_path("histogram.csv")?;
    report::write_histogram(&path, &bins)?;
    run.record_artifact(&path);

    let report_path = report_path_for(&model_path);
    let text = std::fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
    run.record_input(&report_path)?;
    let train_report: TrainReport = serde_json::from_str(&text).map_err(|e| {
        Error::ModelFormat(format!("{}: {e}", report_path.display()))
    })?;
    let path = run.artifact_path("loss_curve.csv")?;
    report::write_loss_curve(&path, &train_report.loss_per_epoch)?;
    run.record_artifact(&path);

    let eval = evaluation::evaluate(&model.network, &model.scaler, &samples)?;
    let path = run.artifact_path("parity.csv")?;
    report::write_parity(&path, &eval.parity)?;
    run.record_artifact(&path);

    let importance = connection_weights_labeled(&model.network, &model.input_labels);
    let path = run.artifact_path("importance.csv")?;
    report::write_importance(&path, &importance)?;
    run.record_artifact(&path);

    println!(
        "report written to {} ({} histogram bins, {} epochs, {} parity rows)",
        run.settings.outdir.display(),
        bins.len(),
        train_report.loss_per_epoch.len(),
        eval.n
    );
    Ok(())
}
