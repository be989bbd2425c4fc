//! The `egp` command line: corpus extraction, prior fitting, prediction,
//! evaluation and synthetic data generation. Every subcommand reads and
//! writes files, prints one JSON status line on success and exits with
//! 0 (success), 2 (usage or parse error) or 3 (numerical or data failure).
//!
//! Options can also come from a flat `key=value` file passed with
//! `--config`; keys are flag names without the leading dashes and flags on
//! the command line win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crate::dataset::{self, Corpus, SamplePath, SeriesFormat, WindowConfig};
use crate::em_prior::{fit_em, EmConfig};
use crate::empirical_prior::fit_dense;
use crate::error::Error;
use crate::inference::{condition, default_obs_noise, sample_paths, GaussianPredictive, Prior, PriorHandle};
use crate::kernels::{fit_kernel_hyperparams, KernelFamily, KernelSpec, MeanSpec};
use crate::metrics::{self, EvalRecord, Metric};
use crate::rng;

#[derive(Debug, Parser)]
#[command(name = "egp", version, about = "Empirical Gaussian-process priors from historical sample paths")]
pub struct Cli {
    /// Flat key=value file with default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract sliding-window subseries into a JSONL corpus.
    Windows(WindowsArgs),
    /// Fit a dense or EM prior on a corpus.
    Fit(FitArgs),
    /// Condition a prior on a context series and write the predictive.
    Predict(PredictArgs),
    /// Score predictions against targets.
    Eval(EvalArgs),
    /// Generate a synthetic corpus from a GP or geometric Brownian motion.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    LogAlign,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Dense,
    Em,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Rbf,
    Matern52,
    Matern32,
    Periodic,
    Linear,
    Quadratic,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Rbf => KernelFamily::Rbf,
            KernelArg::Matern52 => KernelFamily::Matern52,
            KernelArg::Matern32 => KernelFamily::Matern32,
            KernelArg::Periodic => KernelFamily::Periodic,
            KernelArg::Linear => KernelFamily::Linear,
            KernelArg::Quadratic => KernelFamily::Quadratic,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value = "matern52")]
    pub kernel: KernelArg,
    #[arg(long)]
    pub lengthscale: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub period: Option<f64>,
}

impl KernelArgs {
    /// The kernel with unset lengthscale/amplitude defaulting to 1.
    fn spec(&self) -> KernelSpec {
        KernelSpec {
            family: self.kernel.into(),
            lengthscale: self.lengthscale.unwrap_or(1.0),
            amplitude: self.amplitude.unwrap_or(1.0),
            period: self.period.or((self.kernel == KernelArg::Periodic).then_some(1.0)),
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct WindowsArgs {
    /// Input series files (CSV with a `y` column, or JSONL).
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub context_len: usize,
    #[arg(long)]
    pub pred_len: usize,
    #[arg(long, default_value_t = 100_000)]
    pub max_windows: usize,
    /// Trailing points of each series excluded from windowing.
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub transform: TransformArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, value_enum, default_value = "dense")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 64)]
    pub grid_size: usize,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Constant base mean for EM; zero when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub base_mean: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub noise_var: f64,
    #[arg(long)]
    pub estimate_noise: bool,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PredictArgs {
    /// Prior file from `fit`; without it the `--kernel` flags define a
    /// parametric prior.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Context CSV (`t,y` or `y`). Omitted or header-only means no data.
    #[arg(long)]
    pub context: Option<PathBuf>,
    /// Forecast this many steps past the end of the context.
    #[arg(long, conflicts_with = "query")]
    pub horizon: Option<usize>,
    /// Comma-separated query locations.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub query: Option<Vec<f64>>,
    #[arg(long)]
    pub obs_noise_var: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    /// Directory with one sub-directory per model holding `<dataset>.csv`
    /// predictive files.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Directory with `<dataset>.csv` target series.
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub baseline: String,
    /// Per-record CSV; the summary goes to `<output>.summary.json`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Geometric Brownian motion instead of a GP.
    #[arg(long)]
    pub gbm: bool,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub drift: f64,
    #[arg(long, default_value_t = 0.2)]
    pub volatility: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
    #[arg(long, default_value_t = 256)]
    pub num_paths: usize,
    #[arg(long, default_value_t = 64)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub grid_start: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub grid_end: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct CliFailure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliFailure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. }
            | Error::EmptyFile(_)
            | Error::NonMonotoneTime { .. }
            | Error::InvalidSpec(_)
            | Error::UnsupportedFormat(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            _ => 3,
        };
        let hint = match &e {
            Error::NotPsd { .. } => "; try a larger --jitter or --noise-var",
            Error::TooFewPaths(_) => "; the dense prior needs at least two paths",
            _ => "",
        };
        CliFailure {
            code,
            message: format!("{e}{hint}"),
        }
    }
}

fn usage(message: impl Into<String>) -> CliFailure {
    CliFailure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = Result<Status, CliFailure>;

/// Summary printed as the single JSON status line.
#[derive(Debug, Default)]
pub struct Status {
    pub outputs: Vec<PathBuf>,
    pub counts: BTreeMap<String, serde_json::Value>,
}

impl Status {
    fn count(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.counts.insert(key.into(), value.into());
        self
    }
}

/// Splices `--config FILE` entries into `args` right after the subcommand.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliFailure> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = Some(PathBuf::from(it.next().ok_or_else(|| usage("--config needs a file"))?));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(config) = config else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&config).map_err(|e| usage(format!("{}: {e}", config.display())))?;
    let mut extra = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected key=value", config.display(), i + 1)))?;
        let (key, value) = (key.trim().trim_start_matches("--"), value.trim());
        match value {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => extra.push(OsString::from(format!("--{key}={value}"))),
        }
    }
    let at = rest.len().min(2);
    rest.splice(at..at, extra);
    Ok(rest)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: Vec<OsString>) -> u8 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let start = Instant::now();
    let (name, result) = match &cli.command {
        Command::Windows(a) => ("windows", cmd_windows(a)),
        Command::Fit(a) => ("fit", cmd_fit(a)),
        Command::Predict(a) => ("predict", cmd_predict(a)),
        Command::Eval(a) => ("eval", cmd_eval(a)),
        Command::Synth(a) => ("synth", cmd_synth(a)),
    };
    match result {
        Ok(status) => {
            let line = json!({
                "command": name,
                "status": "ok",
                "elapsed_ms": start.elapsed().as_millis() as u64,
                "outputs": status.outputs,
                "counts": status.counts,
            });
            println!("{line}");
            0
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn check_inputs<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<(), CliFailure> {
    for p in paths {
        if !p.exists() {
            return Err(usage(format!("{}: no such file or directory", p.display())));
        }
    }
    Ok(())
}

fn check_output(path: &Path) -> Result<(), CliFailure> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            return Err(usage(format!("{}: output directory does not exist", dir.display())));
        }
    }
    if path.is_dir() {
        return Err(usage(format!("{}: output is a directory", path.display())));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliFailure> {
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn series_format(path: &Path, arg: Option<FormatArg>) -> SeriesFormat {
    match arg {
        Some(FormatArg::Csv) => SeriesFormat::Csv,
        Some(FormatArg::Jsonl) => SeriesFormat::Jsonl,
        None => SeriesFormat::from_path(path),
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_windows(a: &WindowsArgs) -> CmdResult {
    check_inputs(&a.input)?;
    check_output(&a.output)?;
    if a.context_len == 0 || a.pred_len == 0 || a.max_windows == 0 {
        return Err(usage("--context-len, --pred-len and --max-windows must be positive"));
    }
    let mut series = Vec::new();
    for p in &a.input {
        series.extend(dataset::load_series(p, series_format(p, a.format))?);
    }
    let cfg = WindowConfig {
        holdout_tail: a.holdout,
        ..WindowConfig::new(a.context_len, a.pred_len, a.max_windows, a.seed)
    };
    let mut corpus = dataset::extract_windows(&series, &cfg)?;
    if a.transform == TransformArg::LogAlign {
        corpus = dataset::transform_log_align(&corpus)?;
    }
    let mut out = create(&a.output)?;
    corpus.write_jsonl(&mut out)?;
    out.flush().map_err(Error::from)?;

    let placements: usize = corpus.meta.get("placements").and_then(|v| v.parse().ok()).unwrap_or(0);
    let used: usize = corpus.meta.get("series_used").and_then(|v| v.parse().ok()).unwrap_or(0);
    Ok(Status {
        outputs: vec![a.output.clone()],
        ..Default::default()
    }
    .count("windows", corpus.len())
    .count("series", series.len())
    .count("series_used", used)
    .count("placements", placements)
    .count("coverage", if placements > 0 { corpus.len() as f64 / placements as f64 } else { 0.0 }))
}

fn load_corpus(path: &Path, format: Option<FormatArg>) -> Result<Corpus, CliFailure> {
    Ok(Corpus::new(dataset::load_series(path, series_format(path, format))?))
}

pub fn cmd_fit(a: &FitArgs) -> CmdResult {
    check_inputs([&a.corpus])?;
    check_output(&a.output)?;
    if a.grid_size == 0 {
        return Err(usage("--grid-size must be positive"));
    }
    let corpus = load_corpus(&a.corpus, a.format)?;
    let grid = corpus.default_grid(a.grid_size)?;
    let status = Status {
        outputs: vec![a.output.clone()],
        ..Default::default()
    }
    .count("paths", corpus.len())
    .count("grid_size", grid.len());

    match a.mode {
        ModeArg::Dense => {
            let prior = fit_dense(&corpus, &grid)?;
            fs::write(&a.output, prior.to_json()?).map_err(Error::from)?;
            Ok(status.count("rank", prior.rank()))
        }
        ModeArg::Em => {
            let mut kernel = a.kernel.spec();
            kernel.validate()?;
            if a.kernel.lengthscale.is_none() || a.kernel.amplitude.is_none() {
                let fitted = fit_kernel_hyperparams(&kernel, &corpus)?;
                kernel.lengthscale = a.kernel.lengthscale.unwrap_or(fitted.lengthscale);
                kernel.amplitude = a.kernel.amplitude.unwrap_or(fitted.amplitude);
            }
            let base_mean = a.base_mean.map_or(MeanSpec::Zero, |value| MeanSpec::Constant { value });
            let cfg = EmConfig {
                max_iters: a.max_iters,
                tol: a.tol,
                noise_var: a.noise_var,
                estimate_noise: a.estimate_noise,
                jitter: a.jitter,
            };
            let prior = fit_em(&corpus, &grid, &kernel, &base_mean, &cfg)?;
            fs::write(&a.output, prior.to_json()?).map_err(Error::from)?;

            let trace_path = sidecar(&a.output, ".trace.csv");
            let mut trace = create(&trace_path)?;
            writeln!(trace, "iteration,loglik,mean_step,cov_step,noise_var").map_err(Error::from)?;
            for it in &prior.history {
                writeln!(
                    trace,
                    "{},{},{},{},{}",
                    it.iteration, it.loglik, it.mean_step, it.cov_step, it.noise_var
                )
                .map_err(Error::from)?;
            }
            trace.flush().map_err(Error::from)?;
            let mut status = status
                .count("iterations_run", prior.iterations_run)
                .count("converged", prior.final_step_norms.0.max(prior.final_step_norms.1) < cfg.tol)
                .count("noise_var", prior.noise_var)
                .count("lengthscale", kernel.lengthscale)
                .count("amplitude", kernel.amplitude);
            status.outputs.push(trace_path);
            Ok(status)
        }
    }
}

fn load_context(path: Option<&PathBuf>) -> Result<Option<SamplePath>, CliFailure> {
    let Some(path) = path else {
        return Ok(None);
    };
    match dataset::load_series(path, SeriesFormat::Csv) {
        Ok(mut s) => Ok(Some(s.remove(0))),
        Err(Error::EmptyFile(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Query locations for `--horizon`: `h` steps of the context spacing past the
/// last context input, or `0..h` without context.
pub fn horizon_query(context: Option<&SamplePath>, horizon: usize) -> Vec<f64> {
    match context {
        Some(c) => {
            let n = c.len();
            let step = if n >= 2 { c.xs[n - 1] - c.xs[n - 2] } else { 1.0 };
            (1..=horizon).map(|h| c.xs[n - 1] + step * h as f64).collect()
        }
        None => (0..horizon).map(|h| h as f64).collect(),
    }
}

pub fn cmd_predict(a: &PredictArgs) -> CmdResult {
    check_inputs(a.prior.iter().chain(a.context.iter()))?;
    check_output(&a.output)?;
    let prior = match &a.prior {
        Some(p) => Prior::from_json(&fs::read_to_string(p).map_err(Error::from)?)?,
        None => {
            let kernel = a.kernel.spec();
            kernel.validate()?;
            Prior::Parametric {
                kernel,
                mean: MeanSpec::Zero,
            }
        }
    };
    let context = load_context(a.context.as_ref())?;
    let query = match (&a.query, a.horizon) {
        (Some(q), _) if !q.is_empty() => q.clone(),
        (_, Some(h)) if h > 0 => horizon_query(context.as_ref(), h),
        _ => return Err(usage("give --horizon or --query")),
    };
    let (train_x, train_y) = context
        .as_ref()
        .map_or((Vec::new(), Vec::new()), |c| (c.xs.clone(), c.ys.clone()));
    let noise = a.obs_noise_var.unwrap_or_else(|| default_obs_noise(&train_y));
    let handle = PriorHandle::new(&prior, noise)?;
    let pred = condition(&handle, &train_x, &train_y, &query)?;
    let mut out = create(&a.output)?;
    pred.write_csv(&mut out)?;
    out.flush().map_err(Error::from)?;
    Ok(Status {
        outputs: vec![a.output.clone()],
        ..Default::default()
    }
    .count("context", train_x.len())
    .count("query", query.len()))
}

/// Reads the `mean` and `std` columns of a predictive CSV.
pub fn read_predictive_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (mc, sc) = (col("mean")?, col("std")?);
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |c: usize| -> Result<f64, Error> {
            rec.get(c).and_then(|v| v.trim().parse().ok()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                column: c as u64 + 1,
                message: "not a number".into(),
            })
        };
        means.push(get(mc)?);
        stds.push(get(sc)?);
    }
    Ok((means, stds))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    Ok(entries)
}

pub fn cmd_eval(a: &EvalArgs) -> CmdResult {
    check_inputs([&a.predictions, &a.targets])?;
    check_output(&a.output)?;
    let mut records = Vec::new();
    for model_dir in sorted_entries(&a.predictions)?.into_iter().filter(|p| p.is_dir()) {
        let model = model_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for pred_path in sorted_entries(&model_dir)? {
            if pred_path.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let dataset = pred_path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let target_path = a.targets.join(format!("{dataset}.csv"));
            if !target_path.exists() {
                return Err(Error::IncompleteGrid {
                    model: "targets".into(),
                    dataset,
                }
                .into());
            }
            let target = dataset::load_series(&target_path, SeriesFormat::Csv)?.remove(0);
            let (means, stds) = read_predictive_csv(&pred_path)?;
            records.push(EvalRecord {
                rmse: metrics::rmse(&means, &target.ys)?,
                crps: metrics::mean_crps(&means, &stds, &target.ys)?,
                model: model.clone(),
                dataset,
            });
        }
    }
    if records.is_empty() {
        return Err(usage(format!("{}: no predictions found", a.predictions.display())));
    }
    let relative = metrics::crps_relative(&records, &a.baseline)?;
    let rank_crps = metrics::average_rank(&records, Metric::Crps)?;
    let rank_rmse = metrics::average_rank(&records, Metric::Rmse)?;

    let mut out = create(&a.output)?;
    metrics::write_records_csv(&records, &mut out)?;
    out.flush().map_err(Error::from)?;

    let summary_path = sidecar(&a.output, ".summary.json");
    let models: BTreeMap<&String, serde_json::Value> = relative
        .iter()
        .map(|(m, rel)| {
            (
                m,
                json!({
                    "relative_crps": rel,
                    "rank_crps": rank_crps[m].0,
                    "rank_crps_se": rank_crps[m].1,
                    "rank_rmse": rank_rmse[m].0,
                    "rank_rmse_se": rank_rmse[m].1,
                }),
            )
        })
        .collect();
    let summary = json!({"baseline": a.baseline, "models": models});
    fs::write(&summary_path, serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n").map_err(Error::from)?;

    Ok(Status {
        outputs: vec![a.output.clone(), summary_path],
        ..Default::default()
    }
    .count("records", records.len())
    .count("models", relative.len()))
}

/// Exact GBM paths on `times`: `log S` is Brownian motion with drift
/// `drift - volatility^2 / 2`, started at `log s0` at `t = 0`.
pub fn gbm_paths(times: &[f64], drift: f64, volatility: f64, s0: f64, n: usize, seed: u64) -> Vec<SamplePath> {
    let mut r = rng::seeded(seed);
    let log_drift = drift - 0.5 * volatility * volatility;
    (0..n)
        .map(|_| {
            let mut t_prev = 0.0;
            let mut log_s = s0.ln();
            let ys = times
                .iter()
                .map(|&t| {
                    let dt = t - t_prev;
                    let z: f64 = StandardNormal.sample(&mut r);
                    log_s += log_drift * dt + volatility * dt.max(0.0).sqrt() * z;
                    t_prev = t;
                    log_s.exp()
                })
                .collect();
            SamplePath {
                xs: times.to_vec(),
                ys,
            }
        })
        .collect()
}

pub fn cmd_synth(a: &SynthArgs) -> CmdResult {
    check_output(&a.output)?;
    if a.num_paths == 0 || a.grid_size == 0 {
        return Err(usage("--num-paths and --grid-size must be positive"));
    }
    if !(a.grid_end > a.grid_start) && a.grid_size > 1 {
        return Err(usage("--grid-end must exceed --grid-start"));
    }
    let times = crate::linspace(a.grid_start, a.grid_end, a.grid_size);
    let paths = if a.gbm {
        if !(a.s0 > 0.0) || !(a.volatility >= 0.0) || a.grid_start < 0.0 {
            return Err(usage("GBM needs --s0 > 0, --volatility >= 0 and non-negative times"));
        }
        gbm_paths(&times, a.drift, a.volatility, a.s0, a.num_paths, a.seed)
    } else {
        let kernel = a.kernel.spec();
        kernel.validate()?;
        let prior = Prior::Parametric {
            kernel,
            mean: MeanSpec::Zero,
        };
        let pred = GaussianPredictive {
            locations: times.clone(),
            mean: DVector::zeros(times.len()),
            cov: prior.cov(&times, &times)?,
        };
        sample_paths(&pred, a.num_paths, a.seed)?
            .into_iter()
            .map(|ys| SamplePath {
                xs: times.clone(),
                ys,
            })
            .collect()
    };
    let corpus = Corpus::new(paths);
    let mut out = create(&a.output)?;
    corpus.write_jsonl(&mut out)?;
    out.flush().map_err(Error::from)?;
    Ok(Status {
        outputs: vec![a.output.clone()],
        ..Default::default()
    }
    .count("paths", corpus.len())
    .count("grid_size", times.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_values_are_spliced_before_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# defaults\nlengthscale = 0.5\nestimate-noise=true\ntol=false\n").unwrap();
        let args = os(&["egp", "fit", "--config", cfg.to_str().unwrap(), "--lengthscale", "2"]);
        let expanded = expand_config(args).unwrap();
        let strs: Vec<String> = expanded.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(strs, vec!["egp", "fit", "--lengthscale=0.5", "--estimate-noise", "--lengthscale", "2"]);

        let cli = Cli::try_parse_from(
            expand_config(os(&["egp", "fit", "--corpus", "c.jsonl", "--output", "o.json", "--config", cfg.to_str().unwrap(), "--lengthscale", "2"]))
                .unwrap(),
        )
        .unwrap();
        let Command::Fit(f) = cli.command else { panic!() };
        assert_eq!(f.kernel.lengthscale, Some(2.0));
        assert!(f.estimate_noise);
    }

    #[test]
    fn horizon_semantics() {
        let c = SamplePath::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(horizon_query(Some(&c), 3), vec![1.5, 2.0, 2.5]);
        assert_eq!(horizon_query(None, 2), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_volatility_gbm_is_exponential() {
        let times = crate::linspace(0.0, 2.0, 5);
        for p in gbm_paths(&times, 0.3, 0.0, 2.0, 3, 1) {
            for (t, s) in p.xs.iter().zip(&p.ys) {
                assert!((s - 2.0 * (0.3 * t).exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliFailure::from(Error::NoUsableSeries(3)).code, 3);
        assert_eq!(CliFailure::from(Error::InvalidSpec("x".into())).code, 2);
        assert!(CliFailure::from(Error::NotPsd { jitter: 1.0 }).message.contains("--jitter"));
    }
}
