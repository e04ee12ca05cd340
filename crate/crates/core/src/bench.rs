//! Random systems, inputs and outlier noise, and the Monte Carlo engine that
//! compares SS-ML with SS-GS on them.
//!
//! Each run draws everything from its own stream `(master_seed, run)`, so a
//! run's outcome does not depend on how many other runs are requested.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{sample_noise_mixture_labeled, RngHandle};
use crate::error::{Error, Result};
use crate::gibbs::{run_gibbs_with_rng, GammaRateConvention, GibbsConfig};
use crate::kernel::KernelOrder;
use crate::model::{build_regressor, fit_score, Dataset, ImpulseResponse};
use crate::ssml::run_ssml;
use crate::stats::{quantile_sorted, sorted};

pub const POLE_PAIRS: usize = 15;
pub const ZERO_PAIRS: usize = 15;
pub const POLE_RADIUS: (f64, f64) = (0.4, 0.95);
pub const ZERO_RADIUS: (f64, f64) = (0.0, 0.95);
pub const LP_POLE_RANGE: (f64, f64) = (0.75, 0.95);
/// Largest unscaled response magnitude accepted as stable.
pub const INSTABILITY_LIMIT: f64 = 1e6;
/// Runs abort when more than this fraction fails.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;
const MAX_SYSTEM_DRAWS: usize = 1000;

/// `G(z) = gain · z^(−delay) · Π(1 − zₖz⁻¹) / Π(1 − pₖz⁻¹)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    #[serde(with = "complex_pairs")]
    pub zeros: Vec<Complex64>,
    #[serde(with = "complex_pairs")]
    pub poles: Vec<Complex64>,
    pub gain: f64,
    pub delay: usize,
}

mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect())
    }
}

/// Real coefficients of `Π(1 − rₖz⁻¹)` in powers of `z⁻¹`.
fn expand_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = coeffs.clone();
        next.push(Complex64::new(0.0, 0.0));
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] -= r * c;
        }
        coeffs = next;
    }
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Unit-gain response `h(0..len)` of `B(z⁻¹)/A(z⁻¹)` by the difference
/// equation.
fn rational_response(zeros: &[Complex64], poles: &[Complex64], len: usize) -> Result<Vec<f64>> {
    if let Some(p) = poles.iter().find(|p| p.norm() >= 1.0) {
        return Err(Error::Numeric {
            context: "impulse response",
            message: format!("pole {p} lies outside the unit disk"),
        });
    }
    let num = expand_roots(zeros);
    let den = expand_roots(poles);
    let mut h = Vec::with_capacity(len);
    for k in 0..len {
        let mut v = num.get(k).copied().unwrap_or(0.0);
        for j in 1..den.len().min(k + 1) {
            v -= den[j] * h[k - j];
        }
        if !(v.abs() <= INSTABILITY_LIMIT) {
            return Err(Error::Numeric {
                context: "impulse response",
                message: format!("|h({k})| = {v:e} exceeds {INSTABILITY_LIMIT:e}; system treated as unstable"),
            });
        }
        h.push(v);
    }
    Ok(h)
}

/// First `n` samples `g(1..n)` of the transfer function's impulse response.
pub fn impulse_response(tf: &TransferFunction, n: usize) -> Result<ImpulseResponse> {
    if tf.delay == 0 {
        return Err(Error::invalid("delay must be >= 1 for a strictly causal system"));
    }
    let len = n.saturating_sub(tf.delay - 1);
    let h = rational_response(&tf.zeros, &tf.poles, len)?;
    let mut g = vec![0.0; n];
    for (k, v) in h.into_iter().enumerate() {
        g[k + tf.delay - 1] = tf.gain * v;
    }
    ImpulseResponse::new(g)
}

fn conjugate_pairs<R: Rng + ?Sized>(pairs: usize, radius: (f64, f64), rng: &mut R) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        let r = rng.random_range(radius.0..radius.1);
        let angle = rng.random_range(0.0..PI);
        let root = Complex64::from_polar(r, angle);
        roots.push(root);
        roots.push(root.conj());
    }
    roots
}

/// Random stable system with 15 conjugate pole pairs and 15 conjugate zero
/// pairs, unit delay, and gain chosen so that `‖g(1..n)‖₂ = 1`.
///
/// Pole magnitudes are uniform on `[0.4, 0.95)`, zero magnitudes on
/// `[0, 0.95)`, angles uniform on `[0, π)`. Draws whose unscaled response
/// exceeds the instability limit are redrawn.
pub fn generate_system<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<TransferFunction> {
    for _ in 0..MAX_SYSTEM_DRAWS {
        let poles = conjugate_pairs(POLE_PAIRS, POLE_RADIUS, rng);
        let zeros = conjugate_pairs(ZERO_PAIRS, ZERO_RADIUS, rng);
        let mut tf = TransferFunction { zeros, poles, gain: 1.0, delay: 1 };
        let Ok(g) = impulse_response(&tf, n) else { continue };
        let norm = g.as_vector().norm();
        if norm > 0.0 && norm.is_finite() {
            tf.gain = 1.0 / norm;
            return Ok(tf);
        }
    }
    Err(Error::Numeric {
        context: "system generator",
        message: format!("no stable system in {MAX_SYSTEM_DRAWS} draws"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// White Gaussian noise.
    Wn,
    /// White noise through a random second-order low-pass filter.
    Lp,
}

/// White noise filtered by `(1 − ρ)² / (1 − ρz⁻¹)²`, unit DC gain, zero
/// initial state.
pub fn low_pass_input<R: Rng + ?Sized>(rho: f64, len: usize, rng: &mut R) -> Vec<f64> {
    let gain = (1.0 - rho).powi(2);
    let (a1, a2) = (2.0 * rho, -rho * rho);
    let mut out = Vec::with_capacity(len);
    let (mut x1, mut x2) = (0.0, 0.0);
    for _ in 0..len {
        let e: f64 = rng.sample(StandardNormal);
        let x = a1 * x1 + a2 * x2 + gain * e;
        out.push(x);
        x2 = x1;
        x1 = x;
    }
    out
}

pub fn generate_input<R: Rng + ?Sized>(kind: InputKind, len: usize, rng: &mut R) -> Vec<f64> {
    match kind {
        InputKind::Wn => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        InputKind::Lp => {
            let rho = rng.random_range(LP_POLE_RANGE.0..LP_POLE_RANGE.1);
            low_pass_input(rho, len, rng)
        }
    }
}

/// Measurement noise law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `c1·N(0, σ²) + (1 − c1)·N(0, variance_ratio·σ²)` per sample.
    Mixture { c1: f64, variance_ratio: f64 },
    /// `N(0, σ²)` except at `count` random positions, which get
    /// `N(0, variance_ratio·σ²)`.
    ForcedOutliers { count: usize, variance_ratio: f64 },
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Mixture { c1: 0.7, variance_ratio: 100.0 }
    }
}

impl NoiseModel {
    pub fn validate(&self, len: usize) -> Result<()> {
        match *self {
            NoiseModel::Mixture { c1, variance_ratio } => {
                if !(0.0..=1.0).contains(&c1) {
                    return Err(Error::Config(format!("c1 must lie in [0, 1], got {c1}")));
                }
                if !(variance_ratio > 0.0 && variance_ratio.is_finite()) {
                    return Err(Error::Config(format!("variance ratio must be > 0, got {variance_ratio}")));
                }
            }
            NoiseModel::ForcedOutliers { count, variance_ratio } => {
                if count > len {
                    return Err(Error::Config(format!("{count} outliers requested for {len} samples")));
                }
                if !(variance_ratio > 0.0 && variance_ratio.is_finite()) {
                    return Err(Error::Config(format!("variance ratio must be > 0, got {variance_ratio}")));
                }
            }
        }
        Ok(())
    }

    /// Draws a noise record; the second element lists the samples drawn from
    /// the high-variance component.
    pub fn sample<R: Rng + ?Sized>(&self, len: usize, sigma2: f64, rng: &mut R) -> Result<(Vec<f64>, Vec<usize>)> {
        self.validate(len)?;
        match *self {
            NoiseModel::Mixture { c1, variance_ratio } => {
                let (noise, is_outlier) = sample_noise_mixture_labeled(len, sigma2, c1, variance_ratio, rng)?;
                let outliers = (0..len).filter(|&i| is_outlier[i]).collect();
                Ok((noise, outliers))
            }
            NoiseModel::ForcedOutliers { count, variance_ratio } => {
                let mut noise: Vec<f64> =
                    (0..len).map(|_| sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
                let mut idx = sample_indices(rng, len, count).into_vec();
                idx.sort_unstable();
                let scale = (variance_ratio * sigma2).sqrt();
                for &i in &idx {
                    noise[i] = scale * rng.sample::<f64, _>(StandardNormal);
                }
                Ok((noise, idx))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub runs: usize,
    /// Record length `N`.
    pub samples: usize,
    pub input: InputKind,
    /// Impulse response length `n`.
    pub n: usize,
    pub noise: NoiseModel,
    /// `σ² = var(noiseless output) / snr_divisor`.
    pub snr_divisor: f64,
    pub kernel: KernelOrder,
    pub iters: usize,
    pub burn_in: usize,
    pub gamma_rate: GammaRateConvention,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            runs: 20,
            samples: 200,
            input: InputKind::Wn,
            n: 50,
            noise: NoiseModel::default(),
            snr_divisor: 100.0,
            kernel: KernelOrder::First,
            iters: crate::gibbs::DEFAULT_ITERS,
            burn_in: crate::gibbs::DEFAULT_BURN_IN,
            gamma_rate: GammaRateConvention::Half,
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// One of the four outlier experiments: `(N, input)` from
    /// `{(200, LP), (500, LP), (200, WN), (500, WN)}` by `index` in `1..=4`.
    pub fn table_experiment(index: usize) -> Result<Self> {
        let (samples, input) = match index {
            1 => (200, InputKind::Lp),
            2 => (500, InputKind::Lp),
            3 => (200, InputKind::Wn),
            4 => (500, InputKind::Wn),
            _ => return Err(Error::Config(format!("experiment index must be 1..=4, got {index}"))),
        };
        Ok(Self { samples, input, ..Self::default() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.n == 0 || self.samples <= self.n {
            return Err(Error::Config(format!(
                "need N > n >= 1, got N = {}, n = {}",
                self.samples, self.n
            )));
        }
        if !(self.snr_divisor > 0.0 && self.snr_divisor.is_finite()) {
            return Err(Error::Config(format!("snr divisor must be > 0, got {}", self.snr_divisor)));
        }
        self.noise.validate(self.samples)?;
        self.gibbs_config(0).validate()
    }

    pub fn gibbs_config(&self, run: u64) -> GibbsConfig {
        GibbsConfig {
            iters: self.iters,
            burn_in: self.burn_in,
            seed: self.master_seed,
            stream: run,
            gamma_rate: self.gamma_rate,
            ..GibbsConfig::default()
        }
    }
}

/// One simulated identification problem with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub system: TransferFunction,
    pub truth: ImpulseResponse,
    pub dataset: Dataset,
    pub noiseless: Vec<f64>,
    pub sigma2: f64,
    pub outliers: Vec<usize>,
}

fn population_variance(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64
}

/// Draws system, input and noise for one run.
///
/// The noiseless output is the exact response of the drawn system (its
/// impulse response over the full record length, zero initial conditions);
/// the truth is that response truncated at `n`.
pub fn simulate<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<SimulatedData> {
    let system = generate_system(config.n, rng)?;
    let truth = impulse_response(&system, config.n)?;
    let u = generate_input(config.input, config.samples, rng);
    let full = impulse_response(&system, config.samples)?;
    let noiseless: Vec<f64> = build_regressor(&u, config.samples, config.samples)?
        .apply(&full)?
        .iter()
        .copied()
        .collect();
    let sigma2 = population_variance(&noiseless) / config.snr_divisor;
    if !(sigma2 > 0.0) {
        return Err(Error::Numeric {
            context: "simulation",
            message: "noiseless output has zero variance".into(),
        });
    }
    let (noise, outliers) = config.noise.sample(config.samples, sigma2, rng)?;
    let y = noiseless.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let dataset = Dataset::new(u, y)?;
    Ok(SimulatedData { system, truth, dataset, noiseless, sigma2, outliers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub fit_ssml: f64,
    pub fit_ssgs: f64,
    pub sigma2: f64,
    pub sigma2_hat: f64,
    pub beta_hat: f64,
    pub lambda_hat: f64,
    pub outliers: usize,
    pub flagged_coordinates: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub reason: String,
}

/// Boxplot statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let s = sorted(values.iter().copied());
        Some(Self {
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ssml: FiveNumber,
    pub ssgs: FiveNumber,
    /// Fraction of completed runs with `fit_ssgs > fit_ssml`.
    pub win_rate: f64,
    pub completed: usize,
    pub failed: usize,
}

impl Summary {
    pub fn from_runs(runs: &[RunResult], failed: usize) -> Option<Self> {
        let ssml: Vec<f64> = runs.iter().map(|r| r.fit_ssml).collect();
        let ssgs: Vec<f64> = runs.iter().map(|r| r.fit_ssgs).collect();
        let wins = runs.iter().filter(|r| r.fit_ssgs > r.fit_ssml).count();
        Some(Self {
            ssml: FiveNumber::from_values(&ssml)?,
            ssgs: FiveNumber::from_values(&ssgs)?,
            win_rate: wins as f64 / runs.len() as f64,
            completed: runs.len(),
            failed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
    pub summary: Summary,
}

/// Simulates and identifies run `run` of an experiment.
pub fn run_single(config: &ExperimentConfig, run: usize) -> Result<RunResult> {
    let mut rng = RngHandle::new(config.master_seed, run as u64);
    let data = simulate(config, &mut rng)?;
    let ssml = run_ssml(&data.dataset, config.n, config.kernel)?;
    let gibbs = config.gibbs_config(run as u64);
    let (g_ssgs, chain) = run_gibbs_with_rng(&data.dataset, config.n, config.kernel, &gibbs, &ssml, &mut rng)?;
    let fit_ssml = fit_score(&data.truth, &ssml.g_hat)?;
    let fit_ssgs = fit_score(&data.truth, &g_ssgs)?;
    if !(fit_ssml.is_finite() && fit_ssgs.is_finite()) {
        return Err(Error::Numeric { context: "benchmark", message: "non-finite FIT".into() });
    }
    let mut warnings = ssml.warnings.clone();
    if chain.lambda_rate_floored > 0 {
        warnings.push(format!("lambda rate floored in {} sweeps", chain.lambda_rate_floored));
    }
    Ok(RunResult {
        run,
        fit_ssml,
        fit_ssgs,
        sigma2: data.sigma2,
        sigma2_hat: ssml.hyper.sigma2,
        beta_hat: ssml.hyper.beta,
        lambda_hat: ssml.hyper.lambda,
        outliers: data.outliers.len(),
        flagged_coordinates: chain.diagnostics.as_ref().map_or(0, |d| d.flagged_count()),
        warnings,
    })
}

/// Runs every Monte Carlo run (in parallel) and summarizes the FIT scores.
///
/// Failed runs are recorded and excluded; more than 20% failures is an
/// error.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let outcomes: Vec<Result<RunResult>> =
        (0..config.runs).into_par_iter().map(|run| run_single(config, run)).collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (run, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => runs.push(r),
            Err(e) => failures.push(RunFailure { run, reason: e.to_string() }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * config.runs as f64 || runs.is_empty() {
        return Err(Error::Numeric {
            context: "benchmark",
            message: format!(
                "{} of {} runs failed (first: {})",
                failures.len(),
                config.runs,
                failures.first().map_or("", |f| f.reason.as_str())
            ),
        });
    }
    let summary = Summary::from_runs(&runs, failures.len()).expect("at least one run");
    Ok(ExperimentReport { config: config.clone(), runs, failures, summary })
}
