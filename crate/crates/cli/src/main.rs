//! `tctnn`: forecasting, completion and diagnostics for multidimensional time series.
//!
//! Exit codes: 0 success, 1 failed desk suite, 2 usage error,
//! 3 solver failure (non-convergence; outputs are still written), 4 I/O or format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tctnn_core::desk;
use tctnn_core::io::{load_tensor, save_tensor};
use tctnn_core::metrics::{metrics, Region};
use tctnn_core::sampling::SamplingMask;
use tctnn_core::solver::{self, AdmmConfig, KernelChoice, SolveReport};
use tctnn_core::synth::{synth, SynthKind, SynthParams};
use tctnn_core::temporal_conv::{conv_sampling_mask, conv_tensor, InverseMode, TemporalSeries};
use tctnn_core::theory;
use tctnn_core::{DenseTensor, Error};

const EXIT_SUITE_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "tctnn", version, about = "Low-rank tensor completion for multidimensional time-series forecasting")]
struct Cli {
    /// Worker threads for facewise decompositions (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forecast the next H samples of a series.
    Forecast(ForecastArgs),
    /// Fill the unobserved entries of a tensor.
    Complete(CompleteArgs),
    /// Report sampling ratios, incoherence and the exact-prediction horizon.
    Analyze(AnalyzeArgs),
    /// Generate a seeded synthetic series.
    Synth(SynthArgs),
    /// Run a verification suite.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Kernel size, or "auto" for ceil(t/2).
    #[arg(long, default_value = "auto")]
    kernel: KernelChoice,
    #[arg(long, default_value_t = AdmmConfig::default().max_iters)]
    max_iters: usize,
    /// Relative-change tolerance of the stopping rule.
    #[arg(long, default_value_t = AdmmConfig::default().rel_tol)]
    tol: f64,
    #[arg(long, default_value = "scaled-adjoint")]
    inverse: InverseMode,
}

impl SolverArgs {
    fn config(&self) -> AdmmConfig {
        AdmmConfig {
            kernel: self.kernel,
            max_iters: self.max_iters,
            rel_tol: self.tol,
            inverse_mode: self.inverse,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct ForecastArgs {
    /// Observed history, time along mode 1 (TNSR, or CSV for order 2).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    horizon: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Ground truth of the forecast, shaped like the prediction or like the
    /// full series; adds MAE/RMSE and per-step errors to the report.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Tnn,
    Tctnn,
    Tcmnn,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    input: PathBuf,
    /// 0/1 tensor of the same shape; 1 marks an observed entry.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, value_enum, default_value = "tctnn")]
    model: Model,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Kernel size, or "auto" for ceil(t/2).
    #[arg(long, default_value = "auto")]
    kernel: KernelChoice,
    /// Treat the last H samples as unobserved.
    #[arg(long, conflicts_with = "mask")]
    horizon: Option<usize>,
    /// Observation mask to analyze; fully observed if neither this nor --horizon is given.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kind: SynthKind,
    /// Comma-separated extents, time first, e.g. 48,4,3.
    #[arg(long, value_delimiter = ',', required = true)]
    shape: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SynthParams::default().period)]
    period: usize,
    #[arg(long, default_value_t = SynthParams::default().harmonics)]
    harmonics: usize,
    /// Draw amplitudes and phases per fiber instead of plane waves over the features.
    #[arg(long)]
    independent: bool,
    #[arg(long, default_value_t = SynthParams::default().noise)]
    noise: f64,
    #[arg(long, default_value_t = SynthParams::default().step)]
    step: f64,
    #[arg(long, default_value_t = SynthParams::default().rank)]
    rank: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Desk,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot configure thread pool: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_IO;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Io(_) | Error::Format { .. } | Error::NotBinary { .. } | Error::NonFinite { .. }) => EXIT_IO,
        Some(Error::SvdFailed { .. } | Error::ImaginaryResidue { .. }) => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Forecast(a) => run_forecast(a),
        Command::Complete(a) => run_complete(a),
        Command::Analyze(a) => run_analyze(a),
        Command::Synth(a) => run_synth(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn load(path: &Path) -> anyhow::Result<DenseTensor> {
    load_tensor(path).with_context(|| format!("reading {}", path.display()))
}

fn save(t: &DenseTensor, path: &Path) -> anyhow::Result<()> {
    save_tensor(t, path).with_context(|| format!("writing {}", path.display()))
}

fn write_json(value: &Value, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn solver_exit(report: &SolveReport) -> u8 {
    if report.converged {
        0
    } else {
        eprintln!("warning: solver stopped after {} iterations without converging", report.iterations);
        EXIT_SOLVER
    }
}

fn run_forecast(a: ForecastArgs) -> anyhow::Result<u8> {
    let history = TemporalSeries::new(load(&a.input)?)?;
    let cfg = a.solver.config();
    cfg.validate()?;
    let fc = solver::forecast(&history, a.horizon, &cfg)?;
    save(&fc.prediction, &a.output)?;

    let mut doc = fc.report.to_json(&cfg);
    doc["command"] = json!("forecast");
    doc["horizon"] = json!(a.horizon);
    doc["kernel"] = json!(cfg.kernel.resolve(history.len() + a.horizon)?);
    if let Some(path) = &a.truth {
        let truth = load(path)?;
        let truth = if truth.dims() == fc.prediction.dims() {
            truth
        } else {
            let series = TemporalSeries::new(truth)?;
            if series.len() < a.horizon {
                bail!(Error::InvalidArgument(format!("truth has {} samples, fewer than the horizon", series.len())));
            }
            series.slice_time(series.len() - a.horizon, a.horizon)?
        };
        let m = metrics(&fc.prediction, &truth, Region::ForecastOnly { horizon: a.horizon })?;
        doc["metrics"] = serde_json::to_value(&m)?;
        doc["per_step_rmse"] = json!(per_step_rmse(&fc.prediction, &truth));
    }
    write_json(&doc, &a.report)?;
    Ok(solver_exit(&fc.report))
}

fn per_step_rmse(prediction: &DenseTensor, truth: &DenseTensor) -> Vec<f64> {
    let steps = prediction.dims()[0];
    let width = prediction.data().len() / steps;
    prediction
        .data()
        .chunks(width)
        .zip(truth.data().chunks(width))
        .map(|(p, q)| (p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / width as f64).sqrt())
        .collect()
}

fn run_complete(a: CompleteArgs) -> anyhow::Result<u8> {
    let input = load(&a.input)?;
    let mask = SamplingMask::from_indicator(load(&a.mask)?)?;
    let cfg = a.solver.config();
    cfg.validate()?;
    let observed = mask.project(&input)?;
    let (out, report) = match a.model {
        Model::Tnn => solver::solve_tnn(&observed, &mask, &cfg)?,
        Model::Tctnn => {
            let (x, r) = solver::solve_tctnn(&TemporalSeries::new(observed)?, &mask, &cfg)?;
            (x.into_tensor(), r)
        }
        Model::Tcmnn => {
            let (x, r) = solver::solve_tcmnn(&TemporalSeries::new(observed)?, &mask, &cfg)?;
            (x.into_tensor(), r)
        }
    };
    save(&out, &a.output)?;
    let mut doc = report.to_json(&cfg);
    doc["command"] = json!("complete");
    doc["model"] = json!(match a.model {
        Model::Tnn => "tnn",
        Model::Tctnn => "tctnn",
        Model::Tcmnn => "tcmnn",
    });
    doc["observed_fraction"] = json!(mask.count() as f64 / mask.shape().numel() as f64);
    write_json(&doc, &a.report)?;
    Ok(solver_exit(&report))
}

fn run_analyze(a: AnalyzeArgs) -> anyhow::Result<u8> {
    let series = TemporalSeries::new(load(&a.input)?)?;
    let t = series.len();
    let k = a.kernel.resolve(t)?;
    let mask = match (&a.horizon, &a.mask) {
        (Some(h), _) => SamplingMask::prediction(t, *h, series.feature_dims())?,
        (None, Some(path)) => SamplingMask::from_indicator(load(path)?)?,
        (None, None) => SamplingMask::all_ones(series.tensor().shape().clone()),
    };
    if mask.shape() != series.tensor().shape() {
        bail!(Error::ShapeMismatch { left: mask.shape().dims().to_vec(), right: series.tensor().dims().to_vec() });
    }
    let conv_mask = conv_sampling_mask(&mask, k)?;
    let tk = conv_tensor(&series, k)?;

    let mut doc = json!({
        "schema": 1,
        "command": "analyze",
        "dims": series.tensor().dims(),
        "kernel": k,
        "rho": mask.min_sampling_ratio(),
        "rho_t": conv_mask.min_sampling_ratio(),
    });
    match theory::incoherence_mu(&tk) {
        Ok(inc) => {
            let rhs = theory::sampling_threshold(inc.mu, inc.tubal_rank, inc.multi_rank_sum);
            doc["conv_tensor"] = json!({
                "mu": inc.mu,
                "tubal_rank": inc.tubal_rank,
                "multi_rank_sum": inc.multi_rank_sum,
                "rank_tolerance": inc.rank_tolerance,
                "recovery_threshold": rhs,
                "recovery_condition_met": conv_mask.min_sampling_ratio() > rhs,
            });
        }
        Err(Error::ZeroTensor) => doc["conv_tensor"] = Value::Null,
        Err(e) => return Err(e.into()),
    }
    if series.tensor().shape().order() >= 3 {
        match theory::deterministic_recovery_check(&mask, series.tensor()) {
            Ok(check) => doc["tensor"] = serde_json::to_value(&check)?,
            Err(Error::ZeroTensor) => doc["tensor"] = Value::Null,
            Err(e) => return Err(e.into()),
        }
    }
    doc["horizon_bound"] = serde_json::to_value(theory::max_exact_horizon(&series, k)?)?;
    write_json(&doc, &a.report)?;
    println!("rho={} rho_t={} h_max={}", doc["rho"], doc["rho_t"], doc["horizon_bound"]["h_max"]);
    Ok(0)
}

fn run_synth(a: SynthArgs) -> anyhow::Result<u8> {
    let params = SynthParams {
        period: a.period,
        harmonics: a.harmonics,
        coherent: !a.independent,
        noise: a.noise,
        step: a.step,
        rank: a.rank,
    };
    let series = synth(a.kind, &a.shape, &params, a.seed)?;
    save(series.tensor(), &a.output)?;
    Ok(0)
}

fn run_bench(a: BenchArgs) -> anyhow::Result<u8> {
    let Suite::Desk = a.suite;
    let report = desk::run_desk_with(|r| println!("{r}"));
    if let Some(path) = &a.report {
        write_json(&serde_json::to_value(&report)?, path)?;
    }
    let passed = report.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed", report.criteria.len());
    Ok(if report.passed { 0 } else { EXIT_SUITE_FAILED })
}
