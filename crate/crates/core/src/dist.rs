//! Seeded samplers for the distributions used by the estimators and the
//! benchmark, plus the closed-form GIG(a, b, 1/2) density.
//!
//! Gamma laws are parameterised by `(shape, rate)` everywhere.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Below `GIG_B_FLOOR·(2/a)` the `b` parameter is treated as zero and the
/// GIG(a, b, 1/2) law is replaced by its Gamma(1/2, a/2) limit.
pub const GIG_B_FLOOR: f64 = 1e-12;

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent
/// sequences for the same seed. Identical `(seed, stream)` pairs produce
/// identical draws on every platform.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma rate", rate)?;
    let dist = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::invalid(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(dist.sample(rng))
}

/// Parameters of the generalized inverse Gaussian law with density
/// proportional to `τ^(p−1)·exp(−(a·τ + b/τ)/2)` on `τ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl GigParams {
    /// GIG(a, b, 1/2), the only order needed by the τ conditional.
    pub fn half(a: f64, b: f64) -> Result<Self> {
        check_positive("GIG a", a)?;
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("GIG b must be >= 0 and finite, got {b}")));
        }
        Ok(Self { a, b, p: 0.5 })
    }

    /// Whether `b` is small enough that the Gamma(1/2, a/2) limit is used.
    pub fn is_degenerate(&self) -> bool {
        self.b < GIG_B_FLOOR * (2.0 / self.a)
    }

    /// `E[τ] = √(b/a)·(1 + 1/√(ab))`, or `1/a` in the `b → 0` limit.
    pub fn mean(&self) -> f64 {
        if self.b == 0.0 {
            1.0 / self.a
        } else {
            (self.b / self.a).sqrt() * (1.0 + 1.0 / (self.a * self.b).sqrt())
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_degenerate() {
            let dist = Gamma::new(0.5, 2.0 / self.a).expect("a > 0");
            return dist.sample(rng);
        }
        // 1/τ is inverse Gaussian with mean √(a/b) and shape a.
        1.0 / sample_inverse_gaussian((self.a / self.b).sqrt(), self.a, rng)
    }
}

/// Inverse Gaussian draw by the transformation-with-multiple-roots method.
/// The smaller root is obtained from the larger through their product `μ²`
/// to avoid cancellation when `μ` is large.
fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let nu: f64 = rng.sample(StandardNormal);
    let w = nu * nu;
    let mw = mean * w;
    let larger = mean + mean * mw / (2.0 * shape)
        + (mean / (2.0 * shape)) * (4.0 * shape * mw + mw * mw).sqrt();
    let smaller = mean * (mean / larger);
    let u: f64 = rng.random();
    if u * (mean + smaller) <= mean {
        smaller
    } else {
        larger
    }
}

pub fn sample_gig_half<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    Ok(GigParams::half(a, b)?.sample(rng))
}

/// Normalised GIG(a, b, 1/2) density, using
/// `K_{1/2}(z) = √(π/2)·e^(−z)·z^(−1/2)`.
pub fn gig_pdf_half(tau: f64, a: f64, b: f64) -> Result<f64> {
    check_positive("tau", tau)?;
    check_positive("GIG a", a)?;
    check_positive("GIG b", b)?;
    let z = (a * b).sqrt();
    // log of (a/b)^(1/4) / (2 K_{1/2}(z))
    let log_norm = 0.25 * (a / b).ln()
        - std::f64::consts::LN_2
        - 0.5 * std::f64::consts::FRAC_PI_2.ln()
        + z
        + 0.5 * z.ln();
    Ok((log_norm - 0.5 * tau.ln() - 0.5 * (a * tau + b / tau)).exp())
}

/// `mean + L·z` with `z` standard normal.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov_factor: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = mean.len();
    if cov_factor.nrows() != n || cov_factor.ncols() != n {
        return Err(Error::invalid(format!(
            "covariance factor is {}x{}, mean has length {n}",
            cov_factor.nrows(),
            cov_factor.ncols()
        )));
    }
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + cov_factor * z)
}

/// Laplace draw with density `(1/(√2σ))·exp(−√2|v|/σ)`, variance `σ²`.
pub fn sample_laplace<R: Rng + ?Sized>(sigma2: f64, rng: &mut R) -> Result<f64> {
    check_positive("sigma2", sigma2)?;
    let scale = (sigma2 / 2.0).sqrt();
    let u: f64 = rng.random::<f64>() - 0.5;
    Ok(-scale * u.signum() * (1.0 - 2.0 * u.abs()).ln())
}

/// `N` independent draws from `c1·N(0, σ²) + (1 − c1)·N(0, ratio·σ²)`.
pub fn sample_noise_mixture<R: Rng + ?Sized>(
    len: usize,
    sigma2: f64,
    c1: f64,
    variance_ratio: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(sample_noise_mixture_labeled(len, sigma2, c1, variance_ratio, rng)?.0)
}

/// As [`sample_noise_mixture`], also reporting which samples came from the
/// high-variance component.
pub fn sample_noise_mixture_labeled<R: Rng + ?Sized>(
    len: usize,
    sigma2: f64,
    c1: f64,
    variance_ratio: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<bool>)> {
    check_positive("sigma2", sigma2)?;
    check_positive("variance ratio", variance_ratio)?;
    if !(0.0..=1.0).contains(&c1) {
        return Err(Error::invalid(format!("mixture weight c1 must lie in [0, 1], got {c1}")));
    }
    let nominal = sigma2.sqrt();
    let outlier = (variance_ratio * sigma2).sqrt();
    let mut noise = Vec::with_capacity(len);
    let mut labels = Vec::with_capacity(len);
    for _ in 0..len {
        let pick: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        let is_outlier = pick >= c1;
        noise.push(if is_outlier { outlier * z } else { nominal * z });
        labels.push(is_outlier);
    }
    Ok((noise, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        (m, v)
    }

    fn draws(count: usize, mut f: impl FnMut(&mut RngHandle) -> f64, seed: u64) -> Vec<f64> {
        let mut rng = RngHandle::new(seed, 0);
        (0..count).map(|_| f(&mut rng)).collect()
    }

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..5).map({ let mut r = RngHandle::new(7, 3); move |_| r.next_u64() }).collect();
        let b: Vec<u64> = (0..5).map({ let mut r = RngHandle::new(7, 3); move |_| r.next_u64() }).collect();
        let c: Vec<u64> = (0..5).map({ let mut r = RngHandle::new(7, 4); move |_| r.next_u64() }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gamma_mean_shape2_rate4() {
        let xs = draws(100_000, |r| sample_gamma(2.0, 4.0, r).unwrap(), 1);
        let (m, _) = moments(&xs);
        let se = (2.0f64).sqrt() / 4.0 / (1e5f64).sqrt();
        assert!((m - 0.5).abs() < 4.0 * se, "mean {m}");
    }

    #[test]
    fn gamma_exponential_cdf() {
        let xs = draws(100_000, |r| sample_gamma(1.0, 1.0, r).unwrap(), 2);
        let frac = xs.iter().filter(|&&x| x <= 1.0).count() as f64 / xs.len() as f64;
        assert!((frac - (1.0 - (-1.0f64).exp())).abs() < 0.01);
    }

    #[test]
    fn gamma_variance() {
        let xs = draws(100_000, |r| sample_gamma(26.0, 7.3, r).unwrap(), 3);
        let (_, v) = moments(&xs);
        let target = 26.0 / (7.3 * 7.3);
        assert!((v / target - 1.0).abs() < 0.05, "var {v} vs {target}");
    }

    #[test]
    fn gamma_rejects_bad_parameters() {
        let mut rng = RngHandle::new(0, 0);
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_gamma(1.0, -1.0, &mut rng).is_err());
        assert!(sample_gamma(f64::NAN, 1.0, &mut rng).is_err());
    }

    #[test]
    fn gig_symmetric_mean() {
        let xs = draws(100_000, |r| sample_gig_half(2.0, 2.0, r).unwrap(), 4);
        let (m, _) = moments(&xs);
        assert!((m / 1.5 - 1.0).abs() < 0.01, "mean {m}");
    }

    #[test]
    fn gig_degenerate_limit_mean() {
        let p = GigParams::half(4.0, 1e-14).unwrap();
        assert!(p.is_degenerate());
        let xs = draws(100_000, |r| sample_gig_half(4.0, 0.0, r).unwrap(), 5);
        let (m, _) = moments(&xs);
        assert!((m / 0.25 - 1.0).abs() < 0.02, "mean {m}");
    }

    #[test]
    fn gig_rejects_bad_parameters() {
        let mut rng = RngHandle::new(0, 0);
        assert!(sample_gig_half(0.0, 1.0, &mut rng).is_err());
        assert!(sample_gig_half(1.0, -1e-3, &mut rng).is_err());
        assert!(gig_pdf_half(0.0, 1.0, 1.0).is_err());
        assert!(gig_pdf_half(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gig_draws_are_positive_for_extreme_parameters() {
        let mut rng = RngHandle::new(9, 0);
        for &(a, b) in &[(2e8, 1e-6), (1e-6, 1e6), (2.0, 1e-11), (2e4, 1e4), (1.0, 1e-300)] {
            for _ in 0..2_000 {
                let t = sample_gig_half(a, b, &mut rng).unwrap();
                assert!(t > 0.0 && t.is_finite(), "({a}, {b}) -> {t}");
            }
        }
    }

    #[test]
    fn gig_pdf_is_kernel_times_constant() {
        let (a, b) = (3.0, 0.7);
        let ratio = |t: f64| gig_pdf_half(t, a, b).unwrap() / (t.powf(-0.5) * (-(a * t + b / t) / 2.0).exp());
        let r0 = ratio(0.01);
        for t in [0.05, 0.3, 1.0, 2.5, 7.0] {
            assert!((ratio(t) / r0 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mvn_degenerate_and_dimension_checks() {
        let mut rng = RngHandle::new(1, 1);
        let mean = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let x = sample_mvn(&mean, &DMatrix::zeros(3, 3), &mut rng).unwrap();
        assert_eq!(x, mean);
        assert!(sample_mvn(&mean, &DMatrix::zeros(2, 2), &mut rng).is_err());
    }

    #[test]
    fn mvn_identity_moments() {
        let mut rng = RngHandle::new(2, 0);
        let mean = DVector::from_vec(vec![0.5, -1.0]);
        let l = DMatrix::identity(2, 2);
        let m = 100_000;
        let xs: Vec<DVector<f64>> = (0..m).map(|_| sample_mvn(&mean, &l, &mut rng).unwrap()).collect();
        let avg = xs.iter().fold(DVector::zeros(2), |acc, x| acc + x) / m as f64;
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        for x in &xs {
            let d = x - &avg;
            cov += &d * d.transpose();
        }
        cov /= (m - 1) as f64;
        for i in 0..2 {
            assert!((avg[i] - mean[i]).abs() < 4.0 / (m as f64).sqrt());
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 0.02);
            }
        }
    }

    #[test]
    fn mixture_variances() {
        let mut rng = RngHandle::new(3, 0);
        let (_, v) = moments(&sample_noise_mixture(100_000, 2.0, 1.0, 100.0, &mut rng).unwrap());
        assert!((v / 2.0 - 1.0).abs() < 0.03);
        let (_, v) = moments(&sample_noise_mixture(100_000, 1.0, 0.7, 100.0, &mut rng).unwrap());
        assert!((v / 30.7 - 1.0).abs() < 0.05, "var {v}");
        let (_, v) = moments(&sample_noise_mixture(100_000, 1.0, 0.0, 100.0, &mut rng).unwrap());
        assert!((v / 100.0 - 1.0).abs() < 0.03);
        assert!(sample_noise_mixture(3, 1.0, 1.5, 100.0, &mut rng).is_err());
        assert!(sample_noise_mixture(3, 1.0, 0.5, 0.0, &mut rng).is_err());
    }

    #[test]
    fn laplace_moments_and_median() {
        let sigma2 = 1.0;
        let xs = draws(100_000, |r| sample_laplace(sigma2, r).unwrap(), 6);
        let (m, v) = moments(&xs);
        assert!((v - 1.0).abs() < 0.03, "var {v}");
        assert!(m.abs() < 4.0 * (v / 1e5).sqrt());
        let mut abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let median = abs[abs.len() / 2];
        // P(|v| <= x) = 1 - exp(-√2 x / σ) = 1/2
        let target = std::f64::consts::LN_2 / std::f64::consts::SQRT_2;
        assert!((median / target - 1.0).abs() < 0.02, "median {median}");
        let mut rng = RngHandle::new(0, 0);
        assert!(sample_laplace(0.0, &mut rng).is_err());
    }
}
