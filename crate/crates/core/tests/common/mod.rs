//! Independent reference computations for the integration tests: adaptive
//! quadrature and dense linear algebra, with no calls into the code under
//! test beyond building inputs.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `∫_a^b f` by double-exponential quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    quadrature::integrate(f, a, b, 1e-13).integral
}

/// `∫_0^∞ f`, split at `scale`; the tail is mapped onto `(0, 1]` by
/// `τ = scale / s`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, scale: f64) -> f64 {
    let head = integrate(&f, 0.0, scale);
    let tail = integrate(|s| if s <= 0.0 { 0.0 } else { f(scale / s) * scale / (s * s) }, 0.0, 1.0);
    head + tail
}

/// Unnormalized GIG(a, b, 1/2) density.
pub fn gig_kernel(tau: f64, a: f64, b: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    tau.powf(-0.5) * (-0.5 * (a * tau + b / tau)).exp()
}

/// A length scale near the bulk of GIG(a, b, 1/2).
pub fn gig_scale(a: f64, b: f64) -> f64 {
    (b / a).sqrt().max(1.0 / a)
}

/// `E[τ^k]` under GIG(a, b, 1/2) by quadrature.
pub fn gig_moment(a: f64, b: f64, k: i32) -> f64 {
    let s = gig_scale(a, b);
    let z = integrate_half_line(|t| gig_kernel(t, a, b), s);
    integrate_half_line(|t| t.powi(k) * gig_kernel(t, a, b), s) / z
}

/// GIG(a, b, 1/2) distribution function at each of the sorted points `xs`,
/// accumulated interval by interval.
pub fn gig_cdf_sorted(xs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let s = gig_scale(a, b);
    let z = integrate_half_line(|t| gig_kernel(t, a, b), s);
    let mut acc = 0.0;
    let mut prev = 0.0;
    xs.iter()
        .map(|&x| {
            acc += integrate(|t| gig_kernel(t, a, b), prev, x);
            prev = x;
            acc / z
        })
        .collect()
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF
/// evaluated at its sorted points.
pub fn ks_statistic(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs()))
        .fold(0.0, f64::max)
}

pub fn normal_pdf(v: f64, var: f64) -> f64 {
    (-0.5 * v * v / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Laplace density with variance `σ²`.
pub fn laplace_pdf(v: f64, sigma2: f64) -> f64 {
    let s = sigma2.sqrt();
    (-(2.0f64).sqrt() * v.abs() / s).exp() / (2.0f64.sqrt() * s)
}

pub fn sample_mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn gaussian_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Dense lower-triangular Toeplitz regressor, built row by row from the
/// definition `y(t) = Σ_k g(k)·u(t − k)`.
pub fn dense_regressor(u: &[f64], rows: usize, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, n);
    for t in 1..=rows {
        for k in 1..=n {
            if t > k {
                m[(t - 1, k - 1)] = u[t - k - 1];
            }
        }
    }
    m
}

/// `λ·K·Uᵀ·(λ·U·K·Uᵀ + D)⁻¹·y` by LU.
pub fn dense_posterior_mean(
    lambda: f64,
    k: &DMatrix<f64>,
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    noise: &DVector<f64>,
) -> DVector<f64> {
    let sigma_y = u * k * u.transpose() * lambda + DMatrix::from_diagonal(noise);
    let alpha = sigma_y.lu().solve(y).expect("nonsingular output covariance");
    k * u.transpose() * alpha * lambda
}

/// `λK − λK·Uᵀ·Σ_y⁻¹·U·Kλ` by LU.
pub fn dense_posterior_cov(
    lambda: f64,
    k: &DMatrix<f64>,
    u: &DMatrix<f64>,
    noise: &DVector<f64>,
) -> DMatrix<f64> {
    let sigma_y = u * k * u.transpose() * lambda + DMatrix::from_diagonal(noise);
    let cross = u * k * lambda;
    let solved = sigma_y.lu().solve(&cross).expect("nonsingular output covariance");
    k * lambda - cross.transpose() * solved
}

/// `log det Σ_y + yᵀΣ_y⁻¹y` with `Σ_y = λ·U·K·Uᵀ + σ²I`.
pub fn dense_neg2_loglik(lambda: f64, k: &DMatrix<f64>, u: &DMatrix<f64>, y: &DVector<f64>, sigma2: f64) -> f64 {
    let n = y.len();
    let sigma_y = u * k * u.transpose() * lambda + DMatrix::identity(n, n) * sigma2;
    let lu = sigma_y.clone().lu();
    let logdet: f64 = sigma_y
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.ln())
        .sum();
    logdet + y.dot(&lu.solve(y).unwrap())
}

/// First-order stable spline kernel written out from its definition.
pub fn tc_kernel(beta: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| beta.powi((i.max(j) + 1) as i32))
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
