//! Gibbs sampler for the Laplacian-noise model (SS-GS).
//!
//! Each noise sample is Gaussian with its own variance `τᵢ`, and `τᵢ` is
//! exponential with mean `σ²`. The sampler cycles through the full
//! conditionals
//!
//! ```text
//! τᵢ   | g        ~ GIG(2/σ², (yᵢ − Uᵢ·g)², 1/2)        i = 1..N
//! λ⁻¹  | g        ~ Gamma(n/2 + 1, gᵀK⁻¹g / 2)          (shape, rate)
//! g    | λ, τ, y  ~ N(λKUᵀΣ_y⁻¹y, λK − λ²KUᵀΣ_y⁻¹UK),  Σ_y = λUKUᵀ + diag(τ)
//! ```
//!
//! in that order, starting from the SS-ML estimate, and averages the `g`
//! draws after burn-in. `β` and `σ²` stay at their SS-ML values.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{sample_gamma, GigParams, RngHandle};
use crate::error::{Error, Result};
use crate::kernel::{build_kernel, kernel_factor, KernelFactor, KernelMatrix, KernelOrder, KernelSpec};
use crate::model::{build_regressor, Dataset, ImpulseResponse, RegressorMatrix};
use crate::posterior::{check_dims, covariance_form_moments, PosteriorForm, WhitenedPosterior};
use crate::ssml::SsmlResult;
use crate::stats::{quantile_sorted, sorted};

pub const DEFAULT_ITERS: usize = 1500;
pub const DEFAULT_BURN_IN: usize = 500;
pub const DEFAULT_TAU_THIN: usize = 10;
/// Quantile levels checked for split-half stability.
pub const DIAGNOSTIC_PROBS: [f64; 3] = [0.25, 0.5, 0.75];
/// Normalized discrepancy above which a coordinate is flagged.
pub const DIAGNOSTIC_THRESHOLD: f64 = 0.2;
pub const DIAGNOSTIC_MIN_SAMPLES: usize = 100;
const LAMBDA_RATE_FLOOR: f64 = 1e-12;
const IQR_FLOOR: f64 = 1e-12;

/// How the second Gamma parameter of the `λ⁻¹` conditional is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GammaRateConvention {
    /// `rate = gᵀK⁻¹g / 2`, the conjugate update of the Gaussian prior under
    /// a flat prior on `λ⁻¹`.
    #[default]
    Half,
    /// `rate = gᵀK⁻¹g`.
    Literal,
}

impl GammaRateConvention {
    fn rate(self, quad: f64) -> f64 {
        match self {
            GammaRateConvention::Half => quad / 2.0,
            GammaRateConvention::Literal => quad,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    /// Total sweeps `M`.
    pub iters: usize,
    /// Sweeps `M₀` discarded before averaging; `ĝ` averages sweeps `M₀..=M`.
    pub burn_in: usize,
    pub seed: u64,
    pub stream: u64,
    pub gamma_rate: GammaRateConvention,
    /// Store `τ` every `tau_thin` sweeps.
    pub tau_thin: usize,
    /// Replace the `τ` update by a constant (sampler diagnostics only).
    pub fixed_tau: Option<f64>,
    /// Replace the `λ` update by a constant (sampler diagnostics only).
    pub fixed_lambda: Option<f64>,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iters: DEFAULT_ITERS,
            burn_in: DEFAULT_BURN_IN,
            seed: 0,
            stream: 0,
            gamma_rate: GammaRateConvention::Half,
            tau_thin: DEFAULT_TAU_THIN,
            fixed_tau: None,
            fixed_lambda: None,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in == 0 || self.burn_in >= self.iters {
            return Err(Error::Config(format!(
                "need 1 <= burn-in < iterations, got M0 = {}, M = {}",
                self.burn_in, self.iters
            )));
        }
        if self.tau_thin == 0 {
            return Err(Error::Config("tau thinning interval must be >= 1".into()));
        }
        for (name, v) in [("fixed tau", self.fixed_tau), ("fixed lambda", self.fixed_lambda)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn rng(&self) -> RngHandle {
        RngHandle::new(self.seed, self.stream)
    }
}

/// Split-half quantile stability of the post-burn-in `g` draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub probs: [f64; 3],
    /// `discrepancy[k][j]`: |q_j(first half) − q_j(second half)| / IQR for
    /// coordinate `k`.
    pub discrepancy: Vec<[f64; 3]>,
    /// Coordinates whose largest discrepancy exceeds the threshold.
    pub flagged: Vec<usize>,
    pub threshold: f64,
    pub samples: usize,
}

impl QuantileReport {
    pub fn flagged_count(&self) -> usize {
        self.flagged.len()
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.discrepancy.iter().flatten().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct GibbsChain {
    /// `g¹..gᴹ`; entry `k − 1` holds sweep `k`.
    pub g: Vec<DVector<f64>>,
    /// `λ¹..λᴹ`.
    pub lambda: Vec<f64>,
    /// `(sweep, τ)` for every `tau_thin`-th sweep.
    pub tau: Vec<(usize, DVector<f64>)>,
    pub burn_in: usize,
    /// Sweeps where `gᵀK⁻¹g` was zero and the Gamma rate was floored.
    pub lambda_rate_floored: usize,
    pub diagnostics: Option<QuantileReport>,
}

impl GibbsChain {
    /// Draws `g^k` for `k = M₀..=M`.
    pub fn post_burn_in(&self) -> &[DVector<f64>] {
        &self.g[self.burn_in - 1..]
    }

    pub fn iters(&self) -> usize {
        self.g.len()
    }
}

/// GIG parameters of each `τᵢ` given the current residuals.
pub fn tau_conditional_params(
    g: &ImpulseResponse,
    y: &DVector<f64>,
    u: &RegressorMatrix,
    sigma2: f64,
) -> Result<Vec<GigParams>> {
    if y.len() != u.nrows() {
        return Err(Error::invalid("y and regressor disagree on N"));
    }
    let residual = y - u.apply(g)?;
    residual.iter().map(|r| GigParams::half(2.0 / sigma2, r * r)).collect()
}

fn draw_tau<R: Rng + ?Sized>(residual: &DVector<f64>, sigma2: f64, rng: &mut R) -> Result<DVector<f64>> {
    let a = 2.0 / sigma2;
    let mut tau = DVector::zeros(residual.len());
    for (t, r) in tau.iter_mut().zip(residual.iter()) {
        *t = GigParams::half(a, r * r)?.sample(rng);
    }
    Ok(tau)
}

/// `τᵢ ~ GIG(2/σ², (yᵢ − Uᵢ·g)², 1/2)` independently for every sample.
pub fn conditional_tau<R: Rng + ?Sized>(
    g: &ImpulseResponse,
    y: &DVector<f64>,
    u: &RegressorMatrix,
    sigma2: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid(format!("sigma2 must be > 0, got {sigma2}")));
    }
    if y.len() != u.nrows() {
        return Err(Error::invalid("y and regressor disagree on N"));
    }
    draw_tau(&(y - u.apply(g)?), sigma2, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaDraw {
    pub lambda: f64,
    /// The quadratic form was zero and the rate floor was used.
    pub rate_floored: bool,
}

fn draw_lambda<R: Rng + ?Sized>(
    g: &DVector<f64>,
    factor: &KernelFactor,
    kernel_trace: f64,
    convention: GammaRateConvention,
    rng: &mut R,
) -> Result<LambdaDraw> {
    let quad = factor.quadratic_form(g)?;
    let shape = g.len() as f64 / 2.0 + 1.0;
    let mut rate = convention.rate(quad);
    let rate_floored = !(rate > 0.0);
    if rate_floored {
        rate = LAMBDA_RATE_FLOOR * kernel_trace;
    }
    let precision = sample_gamma(shape, rate, rng)?;
    Ok(LambdaDraw { lambda: 1.0 / precision, rate_floored })
}

/// Draws `λ = 1/x` with `x ~ Gamma(n/2 + 1, rate)`, where the rate is
/// `gᵀK⁻¹g/2` or `gᵀK⁻¹g` depending on `convention`. A zero quadratic form
/// is replaced by `1e−12·trace(K)`.
pub fn conditional_lambda<R: Rng + ?Sized>(
    g: &ImpulseResponse,
    k: &KernelMatrix,
    convention: GammaRateConvention,
    rng: &mut R,
) -> Result<LambdaDraw> {
    let factor = kernel_factor(k)?;
    draw_lambda(g.as_vector(), &factor, k.trace(), convention, rng)
}

/// Mean and covariance of `g | λ, τ, y` through the chosen algebraic route.
pub fn conditional_g_moments(
    form: PosteriorForm,
    lambda: f64,
    tau: &DVector<f64>,
    k: &KernelMatrix,
    u: &RegressorMatrix,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_dims(lambda, k.n(), u.matrix(), y, tau)?;
    let factor = kernel_factor(k)?;
    match form {
        PosteriorForm::Information => {
            let whitened = u.matrix() * factor.lower();
            let post = WhitenedPosterior::new(lambda, factor.lower(), &whitened, y, tau)?;
            Ok((post.mean(), post.covariance()))
        }
        PosteriorForm::Covariance => covariance_form_moments(lambda, k, &factor, u.matrix(), y, tau),
    }
}

/// One draw of `g | λ, τ, y`.
pub fn conditional_g<R: Rng + ?Sized>(
    lambda: f64,
    tau: &DVector<f64>,
    k: &KernelMatrix,
    u: &RegressorMatrix,
    y: &DVector<f64>,
    rng: &mut R,
) -> Result<ImpulseResponse> {
    check_dims(lambda, k.n(), u.matrix(), y, tau)?;
    let factor = kernel_factor(k)?;
    let whitened = u.matrix() * factor.lower();
    let g = WhitenedPosterior::new(lambda, factor.lower(), &whitened, y, tau)?.sample(rng)?;
    ImpulseResponse::from_vector(g).map_err(|_| Error::NonFiniteDraw { sweep: 0, conditional: "g" })
}

fn non_finite(v: &DVector<f64>) -> bool {
    v.iter().any(|x| !x.is_finite())
}

/// Mean of the post-burn-in draws, summed in sweep order.
pub fn posterior_average(samples: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = DVector::zeros(samples[0].len());
    for g in samples {
        acc += g;
    }
    acc / samples.len() as f64
}

/// Runs the sampler from an SS-ML initialization, which supplies `g⁰`,
/// `λ⁰`, `β` and `σ²`.
pub fn run_gibbs(
    dataset: &Dataset,
    n: usize,
    order: KernelOrder,
    config: &GibbsConfig,
    init: &SsmlResult,
) -> Result<(ImpulseResponse, GibbsChain)> {
    config.validate()?;
    let mut rng = config.rng();
    run_gibbs_with_rng(dataset, n, order, config, init, &mut rng)
}

/// As [`run_gibbs`], drawing from a caller-owned stream instead of the one
/// named in `config`.
pub fn run_gibbs_with_rng<R: Rng + ?Sized>(
    dataset: &Dataset,
    n: usize,
    order: KernelOrder,
    config: &GibbsConfig,
    init: &SsmlResult,
    rng: &mut R,
) -> Result<(ImpulseResponse, GibbsChain)> {
    config.validate()?;
    if init.g_hat.len() != n {
        return Err(Error::invalid(format!(
            "initial estimate has length {}, expected {n}",
            init.g_hat.len()
        )));
    }
    let rows = dataset.len();
    let u = build_regressor(dataset.u(), rows, n)?;
    let y = dataset.y_vector();
    let sigma2 = init.hyper.sigma2;
    let kernel = build_kernel(KernelSpec::new(order, init.hyper.beta, n)?)?;
    let factor = kernel_factor(&kernel)?;
    let whitened = u.matrix() * factor.lower();
    let trace = kernel.trace();

    let mut g = init.g_hat.as_vector().clone();
    let mut chain = GibbsChain {
        g: Vec::with_capacity(config.iters),
        lambda: Vec::with_capacity(config.iters),
        tau: Vec::new(),
        burn_in: config.burn_in,
        lambda_rate_floored: 0,
        diagnostics: None,
    };

    for sweep in 1..=config.iters {
        let tau = match config.fixed_tau {
            Some(t) => DVector::from_element(rows, t),
            None => {
                let residual = &y - u.matrix() * &g;
                draw_tau(&residual, sigma2, rng)?
            }
        };
        if tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::NonFiniteDraw { sweep, conditional: "tau" });
        }

        let lambda = match config.fixed_lambda {
            Some(l) => l,
            None => {
                let draw = draw_lambda(&g, &factor, trace, config.gamma_rate, rng)?;
                chain.lambda_rate_floored += usize::from(draw.rate_floored);
                draw.lambda
            }
        };
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::NonFiniteDraw { sweep, conditional: "lambda" });
        }

        g = WhitenedPosterior::new(lambda, factor.lower(), &whitened, &y, &tau)
            .map_err(|_| Error::NonFiniteDraw { sweep, conditional: "g" })?
            .sample(rng)?;
        if non_finite(&g) {
            return Err(Error::NonFiniteDraw { sweep, conditional: "g" });
        }

        if sweep % config.tau_thin == 0 {
            chain.tau.push((sweep, tau));
        }
        chain.lambda.push(lambda);
        chain.g.push(g.clone());
    }

    let g_hat = posterior_average(chain.post_burn_in());
    if chain.post_burn_in().len() > DIAGNOSTIC_MIN_SAMPLES {
        chain.diagnostics = Some(quantile_diagnostics(&chain)?);
    }
    let g_hat = ImpulseResponse::from_vector(g_hat)
        .map_err(|_| Error::NonFiniteDraw { sweep: config.iters, conditional: "g" })?;
    Ok((g_hat, chain))
}

pub fn quantile_diagnostics(chain: &GibbsChain) -> Result<QuantileReport> {
    quantile_report(chain.post_burn_in())
}

/// Split-half quantile check on an arbitrary sequence of draws.
///
/// For every coordinate the 0.25/0.5/0.75 quantiles of the first and second
/// halves are compared; the absolute difference is divided by the
/// interquartile range of all draws (floored at `1e−12·range`).
pub fn quantile_report(samples: &[DVector<f64>]) -> Result<QuantileReport> {
    // M − M₀ >= 100, and the post-burn-in window holds M − M₀ + 1 draws.
    if samples.len() <= DIAGNOSTIC_MIN_SAMPLES {
        return Err(Error::Config(format!(
            "quantile diagnostics need more than {DIAGNOSTIC_MIN_SAMPLES} post-burn-in draws, have {}",
            samples.len()
        )));
    }
    let n = samples[0].len();
    let half = samples.len() / 2;
    let mut discrepancy = Vec::with_capacity(n);
    let mut flagged = Vec::new();
    for k in 0..n {
        let all = sorted(samples.iter().map(|g| g[k]));
        let first = sorted(samples[..half].iter().map(|g| g[k]));
        let second = sorted(samples[half..].iter().map(|g| g[k]));
        let range = all[all.len() - 1] - all[0];
        let iqr = (quantile_sorted(&all, 0.75) - quantile_sorted(&all, 0.25)).max(IQR_FLOOR * range);
        let mut row = [0.0; 3];
        for (slot, &p) in row.iter_mut().zip(DIAGNOSTIC_PROBS.iter()) {
            let diff = (quantile_sorted(&first, p) - quantile_sorted(&second, p)).abs();
            *slot = if diff == 0.0 { 0.0 } else { diff / iqr };
        }
        if row.iter().any(|&d| d > DIAGNOSTIC_THRESHOLD) {
            flagged.push(k);
        }
        discrepancy.push(row);
    }
    Ok(QuantileReport {
        probs: DIAGNOSTIC_PROBS,
        discrepancy,
        flagged,
        threshold: DIAGNOSTIC_THRESHOLD,
        samples: samples.len(),
    })
}
