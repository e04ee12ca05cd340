//! Gaussian posterior of `g` given `λ`, the kernel and a diagonal noise
//! covariance `D`, shared by the SS-ML plug-in estimate and the Gibbs
//! `g`-conditional.
//!
//! With `K + εI = L·Lᵀ` and `g = L·w`, the posterior in `w` has precision
//! `A/λ` where `A = I + λ·WᵀD⁻¹W`, `W = U·L`. `A` has every eigenvalue
//! `>= 1`, so its Cholesky factor is well conditioned even when `K` is
//! nearly singular.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::sample_mvn;
use crate::error::{Error, Result};
use crate::kernel::{KernelFactor, KernelMatrix};
use crate::linalg::spd_cholesky;

/// Which algebraic route computes the posterior moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorForm {
    /// `n×n` information form through `A = I + λ·LᵀUᵀD⁻¹UL`.
    Information,
    /// `N×N` covariance form through `Σ_y = λ·U·K·Uᵀ + D`.
    Covariance,
}

impl PosteriorForm {
    /// The form whose factorization has the smaller dimension.
    pub fn preferred(n: usize, rows: usize) -> Self {
        if n <= rows {
            PosteriorForm::Information
        } else {
            PosteriorForm::Covariance
        }
    }
}

pub(crate) fn check_dims(
    lambda: f64,
    factor_n: usize,
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    noise_diag: &DVector<f64>,
) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if u.ncols() != factor_n {
        return Err(Error::invalid(format!(
            "regressor has {} columns, kernel is {factor_n}x{factor_n}",
            u.ncols()
        )));
    }
    if y.len() != u.nrows() || noise_diag.len() != u.nrows() {
        return Err(Error::invalid(format!(
            "regressor has {} rows, y has {}, noise covariance has {}",
            u.nrows(),
            y.len(),
            noise_diag.len()
        )));
    }
    if let Some(d) = noise_diag.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::invalid(format!("noise variances must be positive, got {d}")));
    }
    Ok(())
}

/// Posterior of `g` in whitened coordinates.
pub(crate) struct WhitenedPosterior<'a> {
    lambda: f64,
    kernel_lower: &'a DMatrix<f64>,
    a_lower: DMatrix<f64>,
    w_mean: DVector<f64>,
}

impl<'a> WhitenedPosterior<'a> {
    /// `whitened` is `W = U·L`.
    pub fn new(
        lambda: f64,
        kernel_lower: &'a DMatrix<f64>,
        whitened: &DMatrix<f64>,
        y: &DVector<f64>,
        noise_diag: &DVector<f64>,
    ) -> Result<Self> {
        let n = kernel_lower.nrows();
        let mut scaled = whitened.clone();
        let mut y_scaled = y.clone();
        for (i, &d) in noise_diag.iter().enumerate() {
            let s = 1.0 / d.sqrt();
            scaled.row_mut(i).scale_mut(s);
            y_scaled[i] *= s;
        }
        let mut a = scaled.tr_mul(&scaled) * lambda;
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let rhs = scaled.tr_mul(&y_scaled) * lambda;
        let chol = spd_cholesky(&a, "posterior information matrix")?;
        let w_mean = chol.solve(&rhs);
        Ok(Self { lambda, kernel_lower, a_lower: chol.unpack(), w_mean })
    }

    pub fn mean(&self) -> DVector<f64> {
        self.kernel_lower * &self.w_mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        // λ·L·A⁻¹·Lᵀ = λ·(L·L_A⁻ᵀ)(L·L_A⁻ᵀ)ᵀ
        let b = self.cov_factor_unscaled();
        &b * b.transpose() * self.lambda
    }

    /// `L·L_A⁻ᵀ`; a draw is `mean + √λ·L·L_A⁻ᵀ·z`.
    fn cov_factor_unscaled(&self) -> DMatrix<f64> {
        let inv_t = self
            .a_lower
            .tr_solve_lower_triangular(&DMatrix::identity(self.a_lower.nrows(), self.a_lower.nrows()))
            .expect("positive diagonal");
        self.kernel_lower * inv_t
    }

    /// One draw via [`sample_mvn`] with covariance factor `√λ·L·L_A⁻ᵀ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let factor = self.cov_factor_unscaled() * self.lambda.sqrt();
        sample_mvn(&self.mean(), &factor, rng)
    }
}

/// Posterior mean and covariance through the `N×N` covariance form, using
/// the same jittered kernel `K + εI` as the information form.
pub(crate) fn covariance_form_moments(
    lambda: f64,
    kernel: &KernelMatrix,
    factor: &KernelFactor,
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    noise_diag: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = kernel.n();
    let mut k = kernel.matrix().clone();
    for i in 0..n {
        k[(i, i)] += factor.jitter();
    }
    let uk = u * &k * lambda;
    let mut sigma_y = &uk * u.transpose();
    for (i, &d) in noise_diag.iter().enumerate() {
        sigma_y[(i, i)] += d;
    }
    let chol = spd_cholesky(&sigma_y, "output covariance")?;
    let mean = uk.tr_mul(&chol.solve(y));
    let cov = &k * lambda - uk.tr_mul(&chol.solve(&uk));
    Ok((mean, (&cov + cov.transpose()) * 0.5))
}
