mod common;

use common::*;
use nalgebra::DVector;
use rand::Rng;
use robust_sysid::gibbs::conditional_g_moments;
use robust_sysid::kernel::{build_kernel, KernelMatrix, KernelOrder, KernelSpec};
use robust_sysid::model::build_regressor;
use robust_sysid::ssml::{posterior_mean, posterior_mean_with, MarglikObjective};
use robust_sysid::{PosteriorForm, RegressorMatrix};

struct Instance {
    lambda: f64,
    kernel: KernelMatrix,
    u: RegressorMatrix,
    y: DVector<f64>,
    noise: DVector<f64>,
}

fn instance<R: Rng>(rng: &mut R) -> Instance {
    let n = rng.random_range(2..=30);
    let rows = rng.random_range(n + 1..=80);
    let order = if rng.random::<bool>() { KernelOrder::First } else { KernelOrder::Second };
    let beta = rng.random_range(0.3..0.95);
    let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
    let input = gaussian_vec(rows, rng);
    let noise = DVector::from_fn(rows, |_, _| rng.random_range(-3.0f64..1.0).exp());
    Instance {
        lambda,
        kernel: build_kernel(KernelSpec::new(order, beta, n).unwrap()).unwrap(),
        u: build_regressor(&input, rows, n).unwrap(),
        y: DVector::from_vec(gaussian_vec(rows, rng)),
        noise,
    }
}

#[test]
fn regressor_matches_definition() {
    let mut r = rng(1);
    let u = gaussian_vec(25, &mut r);
    assert_eq!(build_regressor(&u, 25, 7).unwrap().matrix(), &dense_regressor(&u, 25, 7));
}

#[test]
fn both_posterior_forms_match_dense_oracle() {
    let mut r = rng(2024);
    for case in 0..100 {
        let ins = instance(&mut r);
        let oracle = dense_posterior_mean(ins.lambda, ins.kernel.matrix(), ins.u.matrix(), &ins.y, &ins.noise);
        for form in [PosteriorForm::Information, PosteriorForm::Covariance] {
            let got = posterior_mean_with(form, ins.lambda, &ins.kernel, &ins.u, &ins.y, &ins.noise).unwrap();
            let err = rel_err(got.as_vector(), &oracle);
            assert!(err < 1e-8, "case {case} {form:?}: {err:e}");
        }
    }
}

#[test]
fn conditional_g_moments_agree_across_forms() {
    let mut r = rng(77);
    for case in 0..100 {
        let ins = instance(&mut r);
        let k = ins.kernel.matrix();
        let mean_oracle = dense_posterior_mean(ins.lambda, k, ins.u.matrix(), &ins.y, &ins.noise);
        let cov_oracle = dense_posterior_cov(ins.lambda, k, ins.u.matrix(), &ins.noise);
        let prior_scale = (k * ins.lambda).norm();
        for form in [PosteriorForm::Information, PosteriorForm::Covariance] {
            let (mean, cov) =
                conditional_g_moments(form, ins.lambda, &ins.noise, &ins.kernel, &ins.u, &ins.y).unwrap();
            assert!(rel_err(&mean, &mean_oracle) < 1e-8, "case {case} {form:?} mean");
            let cov_err = (&cov - &cov_oracle).norm() / prior_scale;
            assert!(cov_err < 1e-8, "case {case} {form:?} cov: {cov_err:e}");
            assert_eq!(cov, cov.transpose(), "case {case} {form:?}: covariance not symmetric");
        }
    }
}

#[test]
fn constant_tau_reduces_to_gaussian_estimate() {
    let mut r = rng(4242);
    for case in 0..50 {
        let ins = instance(&mut r);
        let sigma2 = r.random_range(0.01..2.0);
        let tau = DVector::from_element(ins.y.len(), sigma2);
        let (mean, _) =
            conditional_g_moments(PosteriorForm::Information, ins.lambda, &tau, &ins.kernel, &ins.u, &ins.y)
                .unwrap();
        let plug_in = posterior_mean(ins.lambda, &ins.kernel, &ins.u, &ins.y, &tau).unwrap();
        let err = rel_err(&mean, plug_in.as_vector());
        assert!(err < 1e-8, "case {case}: {err:e}");
    }
}

#[test]
fn zero_lambda_gives_zero_estimate() {
    let mut r = rng(8);
    let ins = instance(&mut r);
    let g = posterior_mean(0.0, &ins.kernel, &ins.u, &ins.y, &ins.noise).unwrap();
    assert!(g.as_slice().iter().all(|&v| v == 0.0));
    assert!(posterior_mean(-1.0, &ins.kernel, &ins.u, &ins.y, &ins.noise).is_err());
}

#[test]
fn marginal_likelihood_matches_dense_oracle() {
    let mut r = rng(99);
    for case in 0..40 {
        let n = r.random_range(2..=20);
        let rows = r.random_range(n + 1..=60);
        let beta = r.random_range(0.3..0.95);
        let lambda = 10f64.powf(r.random_range(-2.0..2.0));
        let sigma2 = 10f64.powf(r.random_range(-3.0..0.0));
        let input = gaussian_vec(rows, &mut r);
        let y = DVector::from_vec(gaussian_vec(rows, &mut r));
        let u = build_regressor(&input, rows, n).unwrap();
        let k = tc_kernel(beta, n);
        let want = dense_neg2_loglik(lambda, &k, u.matrix(), &y, sigma2);
        let obj = MarglikObjective::new(u, y, sigma2, KernelOrder::First).unwrap();
        for form in [PosteriorForm::Information, PosteriorForm::Covariance] {
            let got = obj.evaluate_with(lambda, beta, form).unwrap();
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "case {case} {form:?}: {got} vs {want}");
        }
    }
}

#[test]
fn marginal_likelihood_at_zero_lambda_is_white_noise() {
    let mut r = rng(5);
    let input = gaussian_vec(30, &mut r);
    let y = DVector::from_vec(gaussian_vec(30, &mut r));
    let sigma2: f64 = 0.4;
    let want = 30.0 * sigma2.ln() + y.norm_squared() / sigma2;
    let obj = MarglikObjective::new(build_regressor(&input, 30, 5).unwrap(), y, sigma2, KernelOrder::First).unwrap();
    let got = obj.evaluate_with(0.0, 0.5, PosteriorForm::Information).unwrap();
    assert!((got - want).abs() < 1e-12 * want.abs());
}
