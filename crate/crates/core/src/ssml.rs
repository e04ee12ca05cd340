//! Empirical-Bayes estimator under Gaussian noise (SS-ML).
//!
//! Pipeline: least-squares noise variance → `(λ, β)` minimizing
//! `log det Σ_y + yᵀΣ_y⁻¹y` with `Σ_y = λ·U·K_β·Uᵀ + σ²I` → posterior mean
//! `λ·K·Uᵀ·Σ_y⁻¹·y`. The result also seeds the Gibbs sampler.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::kernel::{build_kernel, kernel_factor, KernelMatrix, KernelOrder, KernelSpec};
use crate::linalg::{log_det_from_factor, spd_cholesky};
use crate::model::{build_regressor, Dataset, Hyperparameters, ImpulseResponse, RegressorMatrix};
use crate::posterior::{check_dims, covariance_form_moments, PosteriorForm, WhitenedPosterior};

/// Condition number of `UᵀU` above which the least-squares fit is ridged.
const LS_CONDITION_LIMIT: f64 = 1e12;
const LS_RIDGE: f64 = 1e-8;
/// `σ̂² >= SIGMA2_FLOOR·var(y)`.
pub const SIGMA2_FLOOR: f64 = 1e-12;

pub const BETA_GRID_POINTS: usize = 20;
pub const BETA_GRID_RANGE: (f64, f64) = (0.05, 0.99);
pub const LAMBDA_GRID_POINTS: usize = 25;
/// Decades spanned by the λ grid on either side of the data-driven scale.
pub const LAMBDA_GRID_DECADES: f64 = 4.0;
const REFINE_ROUNDS: usize = 2;
const REFINE_SHRINK: f64 = 4.0;
const REFINE_HALF_WIDTH: i32 = 4;
const BETA_REFINE_BOUNDS: (f64, f64) = (1e-3, 0.999);

#[derive(Debug, Clone, PartialEq)]
pub struct Sigma2Estimate {
    pub sigma2: f64,
    /// Ridge added to `UᵀU` when it was too ill-conditioned.
    pub ridge: Option<f64>,
    pub warnings: Vec<String>,
}

/// `‖y − U·ĝ_LS‖² / (N − n)`.
pub fn estimate_sigma2(u: &RegressorMatrix, y: &DVector<f64>) -> Result<Sigma2Estimate> {
    let (rows, n) = (u.nrows(), u.ncols());
    if rows <= n {
        return Err(Error::Config(format!(
            "noise variance estimate needs N > n, got N = {rows}, n = {n}"
        )));
    }
    if y.len() != rows {
        return Err(Error::invalid(format!("y has {} samples, regressor has {rows} rows", y.len())));
    }
    let m = u.matrix();
    let svd = SVD::new(m.clone(), true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 { (s_max / s_min).powi(2) } else { f64::INFINITY };

    let mut warnings = Vec::new();
    let (g_ls, ridge) = if condition > LS_CONDITION_LIMIT {
        let mut gram = m.tr_mul(m);
        let ridge = LS_RIDGE * gram.trace() / n as f64;
        if !(ridge > 0.0) {
            return Err(Error::Numeric {
                context: "noise variance estimate",
                message: "input is identically zero".into(),
            });
        }
        for i in 0..n {
            gram[(i, i)] += ridge;
        }
        warnings.push(format!(
            "least-squares normal matrix has condition {condition:.3e}; added ridge {ridge:.3e}"
        ));
        let chol = spd_cholesky(&gram, "ridged normal matrix")?;
        (chol.solve(&m.tr_mul(y)), Some(ridge))
    } else {
        let g = svd.solve(y, 0.0).map_err(|e| Error::Numeric {
            context: "noise variance estimate",
            message: e.to_string(),
        })?;
        (g, None)
    };
    let residual = y - m * g_ls;
    Ok(Sigma2Estimate {
        sigma2: residual.norm_squared() / (rows - n) as f64,
        ridge,
        warnings,
    })
}

/// Quantities of one kernel decay `β` reused across many `λ` evaluations.
struct BetaTerms {
    beta: f64,
    /// `W = U·L`
    whitened: DMatrix<f64>,
    /// `WᵀW`
    gram: DMatrix<f64>,
    /// `Wᵀy`
    wty: DVector<f64>,
    /// `trace(U·K·Uᵀ)`
    trace_uku: f64,
}

/// Negative log marginal likelihood as a function of `(λ, β)` for fixed data,
/// noise variance and kernel order.
#[derive(Debug, Clone)]
pub struct MarglikObjective {
    u: RegressorMatrix,
    y: DVector<f64>,
    sigma2: f64,
    order: KernelOrder,
}

impl MarglikObjective {
    pub fn new(u: RegressorMatrix, y: DVector<f64>, sigma2: f64, order: KernelOrder) -> Result<Self> {
        if y.len() != u.nrows() {
            return Err(Error::invalid(format!("y has {} samples, regressor has {} rows", y.len(), u.nrows())));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!("sigma2 must be > 0, got {sigma2}")));
        }
        Ok(Self { u, y, sigma2, order })
    }

    pub fn regressor(&self) -> &RegressorMatrix {
        &self.u
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn order(&self) -> KernelOrder {
        self.order
    }

    fn kernel(&self, beta: f64) -> Result<KernelMatrix> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1), got {beta}")));
        }
        build_kernel(KernelSpec::new(self.order, beta, self.u.ncols())?)
    }

    fn beta_terms(&self, beta: f64) -> Result<BetaTerms> {
        let kernel = self.kernel(beta)?;
        let factor = kernel_factor(&kernel)?;
        let whitened = self.u.matrix() * factor.lower();
        let gram = whitened.tr_mul(&whitened);
        let wty = whitened.tr_mul(&self.y);
        let trace_uku = gram.trace();
        Ok(BetaTerms { beta, whitened, gram, wty, trace_uku })
    }

    /// Dual (`n×n`) evaluation. With `A = I + (λ/σ²)·WᵀW` and the posterior
    /// mean `ĝ = L·ŵ`, `ŵ = (λ/σ²)·A⁻¹·Wᵀy`:
    ///
    /// ```text
    /// log det Σ_y = N·log σ² + log det A
    /// yᵀΣ_y⁻¹y    = ‖y − W·ŵ‖²/σ² + ‖ŵ‖²/λ
    /// ```
    ///
    /// The quadratic form is a sum of nonnegative terms, which keeps it
    /// accurate when `σ²` is tiny.
    fn eval_dual(&self, lambda: f64, terms: &BetaTerms) -> Result<f64> {
        let rows = self.y.len() as f64;
        if lambda == 0.0 {
            return Ok(rows * self.sigma2.ln() + self.y.norm_squared() / self.sigma2);
        }
        let n = terms.gram.nrows();
        let ratio = lambda / self.sigma2;
        let mut a = &terms.gram * ratio;
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let chol = spd_cholesky(&a, "marginal likelihood")?;
        let w_hat = chol.solve(&(&terms.wty * ratio));
        let residual = &self.y - &terms.whitened * &w_hat;
        let log_det = rows * self.sigma2.ln() + log_det_from_factor(chol.l_dirty());
        Ok(log_det + residual.norm_squared() / self.sigma2 + w_hat.norm_squared() / lambda)
    }

    /// Direct (`N×N`) evaluation through a Cholesky factor of `Σ_y`.
    fn eval_direct(&self, lambda: f64, terms: &BetaTerms) -> Result<f64> {
        let mut sigma_y = &terms.whitened * terms.whitened.transpose() * lambda;
        for i in 0..sigma_y.nrows() {
            sigma_y[(i, i)] += self.sigma2;
        }
        let chol = spd_cholesky(&sigma_y, "marginal likelihood")?;
        let x = chol.solve(&self.y);
        Ok(log_det_from_factor(chol.l_dirty()) + self.y.dot(&x))
    }

    fn eval_terms(&self, lambda: f64, terms: &BetaTerms, form: PosteriorForm) -> Result<f64> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        match form {
            PosteriorForm::Information => self.eval_dual(lambda, terms),
            PosteriorForm::Covariance => self.eval_direct(lambda, terms),
        }
    }

    /// Evaluates the objective through a specific algebraic route.
    pub fn evaluate_with(&self, lambda: f64, beta: f64, form: PosteriorForm) -> Result<f64> {
        let terms = self.beta_terms(beta)?;
        self.eval_terms(lambda, &terms, form)
    }
}

/// `log det Σ_y + yᵀΣ_y⁻¹y`, using the dual form when `n < N`.
pub fn neg_log_marglik(lambda: f64, beta: f64, obj: &MarglikObjective) -> Result<f64> {
    let form = if obj.u.ncols() < obj.u.nrows() {
        PosteriorForm::Information
    } else {
        PosteriorForm::Covariance
    };
    obj.evaluate_with(lambda, beta, form)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperOptimum {
    pub lambda: f64,
    pub beta: f64,
    pub objective: f64,
    /// Lowest objective over the coarse grid alone.
    pub coarse_objective: f64,
    pub evaluations: usize,
}

struct Search<'a> {
    obj: &'a MarglikObjective,
    form: PosteriorForm,
    best: Option<(f64, f64, f64)>,
    evaluations: usize,
    failures: usize,
}

impl Search<'_> {
    fn offer(&mut self, terms: &BetaTerms, lambda: f64) {
        self.evaluations += 1;
        let value = match self.obj.eval_terms(lambda, terms, self.form) {
            Ok(v) if v.is_finite() => v,
            _ => {
                self.failures += 1;
                return;
            }
        };
        let candidate = (value, terms.beta, lambda);
        let better = match self.best {
            None => true,
            Some(best) => {
                candidate.0 < best.0
                    || (candidate.0 == best.0 && (candidate.1, candidate.2) < (best.1, best.2))
            }
        };
        if better {
            self.best = Some(candidate);
        }
    }
}

/// The coarse `β` grid, `BETA_GRID_POINTS` evenly spaced points on
/// `BETA_GRID_RANGE`.
pub fn beta_grid() -> Vec<f64> {
    let (lo, hi) = BETA_GRID_RANGE;
    let step = (hi - lo) / (BETA_GRID_POINTS - 1) as f64;
    (0..BETA_GRID_POINTS).map(|i| lo + step * i as f64).collect()
}

/// Minimizes [`neg_log_marglik`] over a coarse `(β, λ)` grid followed by two
/// rounds of local grid refinement.
///
/// For each `β` the `λ` grid is log-spaced over
/// `[1e−4, 1e4]·‖y‖²/trace(U·K_β·Uᵀ)`. Each refinement round evaluates a
/// 9×9 grid centred on the incumbent with steps shrunk by 4 relative to the
/// previous round. Ties go to the smaller `β`, then the smaller `λ`.
pub fn optimize_hyperparams(obj: &MarglikObjective) -> Result<HyperOptimum> {
    let form = if obj.u.ncols() < obj.u.nrows() {
        PosteriorForm::Information
    } else {
        PosteriorForm::Covariance
    };
    let mut search = Search { obj, form, best: None, evaluations: 0, failures: 0 };
    let yy = obj.y.norm_squared().max(f64::MIN_POSITIVE);
    let log_step = 2.0 * LAMBDA_GRID_DECADES / (LAMBDA_GRID_POINTS - 1) as f64;

    for beta in beta_grid() {
        let terms = match obj.beta_terms(beta) {
            Ok(t) => t,
            Err(_) => {
                search.failures += LAMBDA_GRID_POINTS;
                search.evaluations += LAMBDA_GRID_POINTS;
                continue;
            }
        };
        let scale = yy / terms.trace_uku.max(f64::MIN_POSITIVE);
        for j in 0..LAMBDA_GRID_POINTS {
            let exponent = -LAMBDA_GRID_DECADES + log_step * j as f64;
            search.offer(&terms, scale * 10f64.powf(exponent));
        }
    }
    let (coarse_objective, _, _) = search.best.ok_or_else(|| Error::Numeric {
        context: "hyperparameter search",
        message: format!("all {} grid evaluations failed", search.evaluations),
    })?;

    let (lo, hi) = BETA_GRID_RANGE;
    let mut beta_step = (hi - lo) / (BETA_GRID_POINTS - 1) as f64;
    let mut log_lambda_step = log_step;
    for _ in 0..REFINE_ROUNDS {
        beta_step /= REFINE_SHRINK;
        log_lambda_step /= REFINE_SHRINK;
        let (_, beta_c, lambda_c) = search.best.expect("coarse grid succeeded");
        let mut betas: Vec<f64> = (-REFINE_HALF_WIDTH..=REFINE_HALF_WIDTH)
            .map(|i| (beta_c + beta_step * i as f64).clamp(BETA_REFINE_BOUNDS.0, BETA_REFINE_BOUNDS.1))
            .collect();
        betas.dedup();
        for beta in betas {
            let Ok(terms) = obj.beta_terms(beta) else { continue };
            for i in -REFINE_HALF_WIDTH..=REFINE_HALF_WIDTH {
                search.offer(&terms, lambda_c * 10f64.powf(log_lambda_step * i as f64));
            }
        }
    }

    let (objective, beta, lambda) = search.best.expect("coarse grid succeeded");
    Ok(HyperOptimum { lambda, beta, objective, coarse_objective, evaluations: search.evaluations })
}

/// Posterior mean `λ·K·Uᵀ·(λ·U·K·Uᵀ + D)⁻¹·y` with `D = diag(noise_diag)`,
/// computed in the form with the smaller factorization.
pub fn posterior_mean(
    lambda: f64,
    k: &KernelMatrix,
    u: &RegressorMatrix,
    y: &DVector<f64>,
    noise_diag: &DVector<f64>,
) -> Result<ImpulseResponse> {
    posterior_mean_with(PosteriorForm::preferred(u.ncols(), u.nrows()), lambda, k, u, y, noise_diag)
}

pub fn posterior_mean_with(
    form: PosteriorForm,
    lambda: f64,
    k: &KernelMatrix,
    u: &RegressorMatrix,
    y: &DVector<f64>,
    noise_diag: &DVector<f64>,
) -> Result<ImpulseResponse> {
    check_dims(lambda, k.n(), u.matrix(), y, noise_diag)?;
    let factor = kernel_factor(k)?;
    let mean = match form {
        PosteriorForm::Information => {
            let whitened = u.matrix() * factor.lower();
            WhitenedPosterior::new(lambda, factor.lower(), &whitened, y, noise_diag)?.mean()
        }
        PosteriorForm::Covariance => {
            covariance_form_moments(lambda, k, &factor, u.matrix(), y, noise_diag)?.0
        }
    };
    ImpulseResponse::from_vector(mean).map_err(|_| Error::Numeric {
        context: "posterior mean",
        message: "non-finite estimate".into(),
    })
}

#[derive(Debug, Clone)]
pub struct SsmlResult {
    pub g_hat: ImpulseResponse,
    pub hyper: Hyperparameters,
    pub objective: f64,
    pub kernel_order: KernelOrder,
    /// Least-squares noise variance before the floor was applied.
    pub sigma2_raw: f64,
    pub warnings: Vec<String>,
}

fn sample_variance(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64
}

/// Full SS-ML pipeline on a dataset.
pub fn run_ssml(dataset: &Dataset, n: usize, order: KernelOrder) -> Result<SsmlResult> {
    let rows = dataset.len();
    if rows <= n {
        return Err(Error::Config(format!("need N > n, got N = {rows}, n = {n}")));
    }
    let u = build_regressor(dataset.u(), rows, n)?;
    let y = dataset.y_vector();
    let est = estimate_sigma2(&u, &y)?;
    let floor = SIGMA2_FLOOR * sample_variance(dataset.y());
    let mut warnings = est.warnings.clone();
    let sigma2 = est.sigma2.max(floor);
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("output record has zero variance"));
    }
    if est.sigma2 < floor {
        warnings.push(format!(
            "noise variance estimate {:.3e} raised to floor {floor:.3e}",
            est.sigma2
        ));
    }

    let obj = MarglikObjective::new(u, y, sigma2, order)?;
    let opt = optimize_hyperparams(&obj)?;
    let kernel = build_kernel(KernelSpec::new(order, opt.beta, n)?)?;
    let noise = DVector::from_element(rows, sigma2);
    let g_hat = posterior_mean(opt.lambda, &kernel, &obj.u, &obj.y, &noise)?;
    Ok(SsmlResult {
        g_hat,
        hyper: Hyperparameters::new(opt.lambda, opt.beta, sigma2)?,
        objective: opt.objective,
        kernel_order: order,
        sigma2_raw: est.sigma2,
        warnings,
    })
}
