//! Command-line front end. `run` returns the process exit code.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::data::{load_split, ImageDataset};
use crate::experiment::{derive_seed, evaluate_temporal, image_f64, run_sweep, MetricsRecord, SweepParam, SweepSpec};
use crate::network::{
    evaluate_atemporal, init_model, load_model, save_model, train, Architecture, Model, OptimizerKind, ProjectionKind,
    TrainConfig,
};
use crate::temporal::{simulate_network, Orientation, Perturbation, RFParams, SimOptions};
use crate::verify::{run_suite, SUITES};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError { code: EXIT_FAILURE, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "phasornet", version, about = "Train phasor networks and run them as spiking resonate-and-fire networks")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Suppress progress logging.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model atemporally.
    Train(TrainArgs),
    /// Evaluate a model atemporally or temporally.
    Eval(EvalArgs),
    /// Temporal accuracy over a perturbation or resolution grid.
    Sweep(SweepArgs),
    /// Run the built-in property suites.
    Verify(VerifyArgs),
    /// Dump the spike trains of one test image.
    ExportSpikes(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProjArg {
    Nrp,
    Rpp,
    None,
}

impl From<ProjArg> for ProjectionKind {
    fn from(p: ProjArg) -> Self {
        match p {
            ProjArg::Nrp => ProjectionKind::Nrp,
            ProjArg::Rpp => ProjectionKind::Rpp,
            ProjArg::None => ProjectionKind::None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ModeArg {
    Atemporal,
    Temporal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    Forward,
    Mirrored,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepParamArg {
    Dropout,
    Jitter,
    Steps,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// MNIST-style dataset directory.
    #[arg(long, env = "PHASORNET_DATA")]
    pub data: Option<PathBuf>,
    /// Number of classes in the label files.
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "nrp")]
    pub proj: ProjArg,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub hidden: Vec<usize>,
    /// Non-zero fraction of the NRP matrix.
    #[arg(long, default_value_t = 1.0)]
    pub nrp_density: f64,
    #[arg(long, default_value_t = 2)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptArg,
    /// Output dropout on hidden layers during training.
    #[arg(long, default_value_t = 0.25)]
    pub dropout: f64,
    /// Use only the first N training images.
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Use only the first N test images.
    #[arg(long)]
    pub test_limit: Option<usize>,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Per-epoch CSV (default: `<out>` with a `.csv` extension).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RfArgs {
    #[arg(long, default_value_t = 10)]
    pub cycles: usize,
    #[arg(long, default_value_t = 40)]
    pub steps_per_cycle: usize,
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
    #[arg(long, default_value_t = 0.2)]
    pub leakage: f64,
    #[arg(long, default_value_t = 0.05)]
    pub box_width: f64,
    #[arg(long, default_value_t = 0.03)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.25)]
    pub refractory: f64,
    #[arg(long, value_enum, default_value = "forward")]
    pub orientation: OrientationArg,
}

impl RfArgs {
    pub fn params(&self) -> CliResult<RFParams> {
        if self.steps_per_cycle < 8 {
            return Err(CliError::usage(format!("--steps-per-cycle must be at least 8 (got {})", self.steps_per_cycle)));
        }
        if self.cycles == 0 {
            return Err(CliError::usage("--cycles must be positive"));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(CliError::usage(format!("--period must be positive (got {})", self.period)));
        }
        if !(self.leakage >= 0.0 && self.leakage.is_finite()) {
            return Err(CliError::usage(format!("--leakage must be >= 0 (got {})", self.leakage)));
        }
        if !(self.box_width > 0.0 && self.box_width < 1.0) {
            return Err(CliError::usage(format!("--box-width must lie in (0, 1) (got {})", self.box_width)));
        }
        if !self.threshold.is_finite() {
            return Err(CliError::usage("--threshold must be finite"));
        }
        if !(self.refractory >= 0.0 && self.refractory.is_finite()) {
            return Err(CliError::usage(format!("--refractory must be >= 0 (got {})", self.refractory)));
        }
        Ok(RFParams {
            period: self.period,
            leakage: self.leakage,
            box_width: self.box_width,
            threshold: self.threshold,
            refractory: self.refractory,
            steps_per_cycle: self.steps_per_cycle,
            n_cycles: self.cycles,
            orientation: match self.orientation {
                OrientationArg::Forward => Orientation::Forward,
                OrientationArg::Mirrored => Orientation::Mirrored,
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "atemporal")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub rf: RfArgs,
    /// Evaluate only the first N test images.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Write spikes (`<PREFIX>.spikes.csv`) and trace (`<PREFIX>.trace.json`)
    /// of the first image.
    #[arg(long, value_name = "PREFIX")]
    pub dump_trace: Option<PathBuf>,
    /// Metrics JSON path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub param: SweepParamArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub rf: RfArgs,
    #[arg(long, default_value_t = 256)]
    pub limit: usize,
    /// Also perturb the encoded input spikes.
    #[arg(long)]
    pub perturb_input: bool,
    /// CSV path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these suites (repeatable).
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
    pub suite: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Index into the test split.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[command(flatten)]
    pub rf: RfArgs,
    #[arg(long, default_value = "spikes.csv")]
    pub out: PathBuf,
    /// Trace JSON path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    if !cli.quiet {
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        // a global pool can be built once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, cli.seed).map(|_| 0),
        Command::Eval(a) => cmd_eval(a, cli.seed).map(|_| 0),
        Command::Sweep(a) => cmd_sweep(a, cli.seed).map(|_| 0),
        Command::Verify(a) => Ok(cmd_verify(a, &mut io::stdout())),
        Command::ExportSpikes(a) => cmd_export(a, cli.seed).map(|_| 0),
    }
}

fn data_dir(args: &DataArgs) -> CliResult<PathBuf> {
    let dir = args.data.clone().ok_or_else(|| CliError::usage("no dataset directory: pass --data or set PHASORNET_DATA"))?;
    if !dir.is_dir() {
        return Err(CliError::usage(format!("dataset directory not found: {}", dir.display())));
    }
    Ok(dir)
}

fn load(args: &DataArgs, split: &str) -> CliResult<ImageDataset> {
    let dir = data_dir(args)?;
    log::info!("loading {split} split from {}", dir.display());
    Ok(load_split(&dir, split, args.classes)?)
}

fn model_file(path: &Path) -> CliResult<Model> {
    if !path.is_file() {
        return Err(CliError::usage(format!("model file not found: {}", path.display())));
    }
    Ok(load_model(path)?)
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    let io_err = |e: io::Error| CliError { code: EXIT_FAILURE, message: format!("writing output: {e}") };
    match path {
        Some(p) => fs::write(p, text).map_err(io_err),
        None => io::stdout().write_all(text.as_bytes()).map_err(io_err),
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

pub fn cmd_train(a: &TrainArgs, seed: u64) -> CliResult<()> {
    if a.hidden.contains(&0) {
        return Err(CliError::usage("--hidden widths must be positive"));
    }
    if !(0.0..1.0).contains(&a.dropout) {
        return Err(CliError::usage(format!("--dropout must lie in [0, 1) (got {})", a.dropout)));
    }
    if !(a.nrp_density > 0.0 && a.nrp_density <= 1.0) {
        return Err(CliError::usage(format!("--nrp-density must lie in (0, 1] (got {})", a.nrp_density)));
    }
    let train_set = load(&a.data, "train")?;
    let test_set = load(&a.data, "t10k")?;
    let train_set = match a.train_limit {
        Some(n) => train_set.take(n),
        None => train_set,
    };
    let test_set = match a.test_limit {
        Some(n) => test_set.take(n),
        None => test_set,
    };

    let mut dims = vec![train_set.n_pixels];
    dims.extend(&a.hidden);
    dims.push(a.data.classes);
    let arch = Architecture { dims, projection: a.proj.into(), nrp_density: a.nrp_density };
    let model = init_model(&arch, seed)?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        optimizer: match a.optimizer {
            OptArg::Adam => OptimizerKind::default(),
            OptArg::Sgd => OptimizerKind::Sgd,
        },
        seed,
        dropout_rate: a.dropout,
    };
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let (trained, metrics) = train(&model, &train_set, &config, Some(&test_set))?;

    save_model(&trained, &a.out)?;
    let mut csv = String::from("epoch,train_loss,train_acc,test_acc\n");
    for m in &metrics {
        csv.push_str(&format!("{},{:.6},{:.6},{}\n", m.epoch, m.train_loss, m.train_acc, opt_f64(m.test_acc)));
    }
    let metrics_path = a.metrics.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    write_output(Some(&metrics_path), &csv)?;
    if let Some(last) = metrics.last() {
        log::info!("final test accuracy {}", opt_f64(last.test_acc));
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs, seed: u64) -> CliResult<()> {
    let params = a.rf.params()?;
    let model = model_file(&a.model)?;
    let test_set = load(&a.data, "t10k")?;
    if a.limit == Some(0) {
        return Err(CliError::usage("--limit must be positive"));
    }
    let atemporal = evaluate_atemporal(&model, &test_set, a.limit)?;
    let mut report = json!({
        "mode": if a.mode == ModeArg::Temporal { "temporal" } else { "atemporal" },
        "images": atemporal.total,
        "atemporal_accuracy": atemporal.accuracy,
        "accuracy": atemporal.accuracy,
    });
    if a.mode == ModeArg::Temporal {
        let eval = evaluate_temporal(&model, &test_set, &params, Perturbation::default(), seed, a.limit)?;
        report["accuracy"] = json!(eval.accuracy);
        report["temporal"] = serde_json::to_value(&eval).map_err(crate::Error::from)?;
        report["rf_params"] = serde_json::to_value(params).map_err(crate::Error::from)?;
    }
    if let Some(prefix) = &a.dump_trace {
        dump_one(&model, &test_set, 0, &params, seed, &with_suffix(prefix, "spikes.csv"), Some(&with_suffix(prefix, "trace.json")))?;
    }
    let text = serde_json::to_string_pretty(&report).map_err(crate::Error::from)? + "\n";
    write_output(a.out.as_deref(), &text)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn dump_one(
    model: &Model,
    dataset: &ImageDataset,
    index: usize,
    params: &RFParams,
    seed: u64,
    spikes: &Path,
    trace: Option<&Path>,
) -> CliResult<()> {
    if index >= dataset.len() {
        return Err(CliError::usage(format!("--index {index} out of range ({} images)", dataset.len())));
    }
    let opts = SimOptions { seed: derive_seed(seed, index as u64), ..SimOptions::default() };
    let run = simulate_network(model, &image_f64(dataset, index), params, &opts)?;
    let mut csv = b"layer,neuron,t\n".to_vec();
    for (layer, train) in run.trace.trains.iter().enumerate() {
        train.write_csv_rows(layer, &mut csv).map_err(|e| crate::Error::io("formatting spikes", e))?;
    }
    fs::write(spikes, csv).map_err(|e| crate::Error::io(format!("writing {}", spikes.display()), e))?;
    if let Some(path) = trace {
        let doc = json!({
            "image": index,
            "label": dataset.label(index),
            "prediction": run.prediction,
            "atemporal_prediction": run.atemporal_prediction,
            "rf_params": params,
            "reference": run.trace.reference,
            "decoded": run.trace.decoded,
            "phase_mse": run.trace.phase_mse,
            "synops": run.synops,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(crate::Error::from)?;
        fs::write(path, text).map_err(|e| crate::Error::io(format!("writing {}", path.display()), e))?;
    }
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs, seed: u64) -> CliResult<()> {
    let params = a.rf.params()?;
    if a.limit == 0 {
        return Err(CliError::usage("--limit must be positive"));
    }
    let model = model_file(&a.model)?;
    let test_set = load(&a.data, "t10k")?;
    let param = match a.param {
        SweepParamArg::Dropout => SweepParam::Dropout,
        SweepParamArg::Jitter => SweepParam::Jitter,
        SweepParamArg::Steps => SweepParam::Steps,
    };
    let spec = SweepSpec {
        model: &model,
        dataset: &test_set,
        params,
        param,
        values: a.values.clone(),
        include_input: a.perturb_input,
        seed,
        limit: Some(a.limit),
    };
    let records = run_sweep(&spec).map_err(|e| CliError::usage(e.to_string()))?;
    let mut csv = format!("{}\n", MetricsRecord::CSV_HEADER);
    for r in &records {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    write_output(a.out.as_deref(), &csv)
}

/// Prints one line per suite; returns the exit code.
pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> i32 {
    let names: Vec<&str> = if a.suite.is_empty() { SUITES.to_vec() } else { a.suite.iter().map(String::as_str).collect() };
    let mut failed = false;
    for name in names {
        let Some(r) = run_suite(name) else {
            let _ = writeln!(out, "FAIL {name}: unknown suite");
            failed = true;
            continue;
        };
        let _ = writeln!(out, "{} {}: {} [{:.2}s]", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail, r.seconds);
        failed |= !r.passed;
    }
    if failed {
        EXIT_FAILURE
    } else {
        0
    }
}

pub fn cmd_export(a: &ExportArgs, seed: u64) -> CliResult<()> {
    let params = a.rf.params()?;
    let model = model_file(&a.model)?;
    let test_set = load(&a.data, "t10k")?;
    dump_one(&model, &test_set, a.index, &params, seed, &a.out, a.trace.as_deref())
}
