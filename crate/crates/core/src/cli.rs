//! The `robust-sysid` command line.
//!
//! ```text
//! robust-sysid simulate  --output data.csv --truth truth.json [--seed S] [--N 200] ...
//! robust-sysid identify  --input data.csv [--truth truth.json] [--output result.json]
//! robust-sysid benchmark --output outdir [--runs 20] [--N 200] [--input-kind wn] ...
//! ```
//!
//! Exit codes: 0 on success, 2 for unreadable or invalid input and
//! configuration, 3 for numeric failures.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    impulse_response, run_experiment, simulate, ExperimentConfig, InputKind, NoiseModel,
};
use crate::dist::RngHandle;
use crate::error::{Error, Result};
use crate::gibbs::{run_gibbs, GammaRateConvention, GibbsConfig, DEFAULT_BURN_IN, DEFAULT_ITERS};
use crate::io::{
    read_dataset, read_truth, write_dataset, write_result, write_runs, write_summary, write_truth,
    DatasetMeta, Estimator, IdentifyConfig, ResultDocument, SsgsEstimate, SsmlEstimate,
    SummaryDocument, TruthDocument, SCHEMA_VERSION,
};
use crate::kernel::KernelOrder;
use crate::model::fit_score;
use crate::ssml::run_ssml;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "robust-sysid", version, about = "Outlier-robust impulse response identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate an impulse response from a `t,u,y` dataset.
    Identify(IdentifyArgs),
    /// Draw a random system and write a dataset plus its ground truth.
    Simulate(SimulateArgs),
    /// Monte Carlo comparison of SS-ML and SS-GS.
    Benchmark(BenchmarkArgs),
}

/// Estimator settings shared by all commands.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Impulse response length.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = KernelOrder::First)]
    pub kernel: KernelOrder,
    /// Gibbs sweeps M.
    #[arg(long, default_value_t = DEFAULT_ITERS)]
    pub iters: usize,
    /// Sweeps M0 discarded before averaging.
    #[arg(long = "burnin", default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "gamma-rate-convention", value_enum, default_value_t = GammaRateConvention::Half)]
    pub gamma_rate: GammaRateConvention,
}

/// Data-generation settings.
#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Record length N.
    #[arg(long = "N", default_value_t = 200)]
    pub samples: usize,
    #[arg(long = "input-kind", value_enum, default_value_t = InputKind::Wn)]
    pub input_kind: InputKind,
    /// Weight of the nominal noise component.
    #[arg(long, default_value_t = 0.7)]
    pub c1: f64,
    /// Outlier variance over nominal variance.
    #[arg(long = "variance-ratio", default_value_t = 100.0)]
    pub variance_ratio: f64,
    /// Nominal noise variance is var(noiseless output) / this.
    #[arg(long = "snr-divisor", default_value_t = 100.0)]
    pub snr_divisor: f64,
    /// Place exactly this many outliers at random samples instead of using
    /// the mixture weight.
    #[arg(long = "forced-outliers")]
    pub forced_outliers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// True impulse response document; enables FIT in the result.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Result document; printed to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Estimator::Both)]
    pub estimator: Estimator,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Dataset file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth document to write.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Directory receiving `runs.csv` and `summary.json`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

fn experiment_config(model: &ModelArgs, exp: &ExperimentArgs, runs: usize) -> Result<ExperimentConfig> {
    let noise = match exp.forced_outliers {
        Some(count) => NoiseModel::ForcedOutliers { count, variance_ratio: exp.variance_ratio },
        None => NoiseModel::Mixture { c1: exp.c1, variance_ratio: exp.variance_ratio },
    };
    let config = ExperimentConfig {
        runs,
        samples: exp.samples,
        input: exp.input_kind,
        n: model.n,
        noise,
        snr_divisor: exp.snr_divisor,
        kernel: model.kernel,
        iters: model.iters,
        burn_in: model.burn_in,
        gamma_rate: model.gamma_rate,
        master_seed: model.seed,
    };
    config.validate()?;
    Ok(config)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Runs the selected estimators on a dataset file.
pub fn cmd_identify(args: &IdentifyArgs) -> Result<ResultDocument> {
    let (dataset, _) = read_dataset(&args.input)?;
    let truth = args.truth.as_deref().map(read_truth).transpose()?;
    let truth = truth.map(|t| t.impulse_response()).transpose()?;
    let m = &args.model;
    if let Some(g) = &truth {
        if g.len() != m.n {
            return Err(Error::Config(format!(
                "truth has {} coefficients but --n is {}",
                g.len(),
                m.n
            )));
        }
    }
    let gibbs = GibbsConfig {
        iters: m.iters,
        burn_in: m.burn_in,
        seed: m.seed,
        gamma_rate: m.gamma_rate,
        ..GibbsConfig::default()
    };
    if args.estimator.runs_ssgs() {
        gibbs.validate()?;
    }

    let fit = |g: &_| truth.as_ref().map(|t| fit_score(t, g)).transpose();
    let ssml = run_ssml(&dataset, m.n, m.kernel)?;
    let mut warnings = ssml.warnings.clone();
    let ssgs = if args.estimator.runs_ssgs() {
        let (g, chain) = run_gibbs(&dataset, m.n, m.kernel, &gibbs, &ssml)?;
        if chain.lambda_rate_floored > 0 {
            warnings.push(format!("lambda rate floored in {} sweeps", chain.lambda_rate_floored));
        }
        let kept = &chain.lambda[chain.burn_in - 1..];
        Some(SsgsEstimate {
            fit: fit(&g)?,
            g_hat: g.to_vec(),
            beta: ssml.hyper.beta,
            sigma2: ssml.hyper.sigma2,
            lambda_mean: kept.iter().sum::<f64>() / kept.len() as f64,
            iters: m.iters,
            burn_in: m.burn_in,
            gamma_rate: m.gamma_rate,
            diagnostics: chain.diagnostics,
        })
    } else {
        None
    };
    let ssml_estimate = SsmlEstimate {
        fit: fit(&ssml.g_hat)?,
        g_hat: ssml.g_hat.to_vec(),
        lambda: ssml.hyper.lambda,
        beta: ssml.hyper.beta,
        sigma2: ssml.hyper.sigma2,
        objective: ssml.objective,
    };

    let doc = ResultDocument {
        schema_version: SCHEMA_VERSION,
        seed: m.seed,
        config: IdentifyConfig {
            input: display(&args.input),
            truth: args.truth.as_deref().map(display),
            estimator: args.estimator,
            n: m.n,
            kernel: m.kernel,
            iters: m.iters,
            burn_in: m.burn_in,
            gamma_rate: m.gamma_rate,
        },
        samples: dataset.len(),
        ssml: Some(ssml_estimate),
        ssgs,
        warnings,
    };
    match &args.output {
        Some(path) => write_result(path, &doc)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&doc)
                .map_err(|e| Error::Numeric { context: "json output", message: e.to_string() })?
        ),
    }
    Ok(doc)
}

/// Simulates one dataset. It is the same draw as run 0 of a benchmark with
/// the same settings.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let config = experiment_config(&args.model, &args.experiment, 1)?;
    let mut rng = RngHandle::new(config.master_seed, 0);
    let data = simulate(&config, &mut rng)?;
    let config_json = serde_json::to_value(&config)
        .map_err(|e| Error::Numeric { context: "json output", message: e.to_string() })?;
    let meta = DatasetMeta { seed: Some(config.master_seed), config: Some(config_json) };
    write_dataset(&args.output, &data.dataset, &meta)?;
    if let Some(path) = &args.truth {
        let doc = TruthDocument {
            schema_version: SCHEMA_VERSION,
            seed: Some(config.master_seed),
            config: Some(config.clone()),
            impulse_response: impulse_response(&data.system, config.n)?.to_vec(),
            system: Some(data.system),
            sigma2: Some(data.sigma2),
            outliers: data.outliers,
        };
        write_truth(path, &doc)?;
    }
    Ok(())
}

/// Runs the experiment, then writes `runs.csv` and `summary.json`.
pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<SummaryDocument> {
    let config = experiment_config(&args.model, &args.experiment, args.runs)?;
    let report = run_experiment(&config)?;
    std::fs::create_dir_all(&args.output).map_err(|e| Error::Io { path: display(&args.output), source: e })?;
    write_runs(&args.output.join("runs.csv"), &config, &report.runs)?;
    let doc = SummaryDocument::new(&config, report.summary, report.failures);
    write_summary(&args.output.join("summary.json"), &doc)?;
    Ok(doc)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Identify(a) => cmd_identify(a).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Benchmark(a) => {
            let doc = cmd_benchmark(a)?;
            let s = &doc.summary;
            eprintln!(
                "{}: median FIT SS-ML {:.2}, SS-GS {:.2}, SS-GS win rate {:.2}, {} failed",
                doc.experiment, s.ssml.median, s.ssgs.median, s.win_rate, s.failed
            );
            Ok(())
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERIC
    }
}

/// Parses `args`, runs the command, reports errors on stderr and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
