mod common;

use common::*;
use nalgebra::DVector;
use rand::Rng;
use robust_sysid::bench::{simulate, ExperimentConfig, NoiseModel};
use robust_sysid::dist::RngHandle;
use robust_sysid::gibbs::{run_gibbs, GibbsConfig};
use robust_sysid::kernel::{build_kernel, KernelOrder, KernelSpec};
use robust_sysid::model::{build_regressor, fit_score};
use robust_sysid::ssml::{
    estimate_sigma2, neg_log_marglik, optimize_hyperparams, run_ssml, MarglikObjective,
};
use robust_sysid::{Dataset, ImpulseResponse};

/// `g ~ N(0, K_β)` through an eigendecomposition of the kernel.
fn prior_draw<R: Rng>(beta: f64, n: usize, rng: &mut R) -> DVector<f64> {
    let k = tc_kernel(beta, n);
    let eig = k.symmetric_eigen();
    let z = DVector::from_vec(gaussian_vec(n, rng));
    let scaled = z.zip_map(&eig.eigenvalues, |zi, l| zi * l.max(0.0).sqrt());
    &eig.eigenvectors * scaled
}

#[test]
fn beta_is_recovered_from_prior_draws() {
    let (true_beta, n, rows) = (0.85, 30, 300);
    let mut r = rng(31);
    let mut hits = 0;
    let reps = 50;
    for _ in 0..reps {
        let g = prior_draw(true_beta, n, &mut r);
        let u = gaussian_vec(rows, &mut r);
        let reg = dense_regressor(&u, rows, n);
        let clean = &reg * &g;
        let var = clean.norm_squared() / rows as f64;
        let y: Vec<f64> = clean.iter().map(|v| v + (0.01 * var).sqrt() * r.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let fit = run_ssml(&Dataset::new(u, y).unwrap(), n, KernelOrder::First).unwrap();
        if (fit.hyper.beta - true_beta).abs() <= 0.1 {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.8 * reps as f64, "{hits} of {reps} within 0.1");
}

#[test]
fn optimizer_matches_brute_force_grid() {
    let mut r = rng(17);
    let (n, rows) = (15, 120);
    let g = prior_draw(0.7, n, &mut r);
    let u = gaussian_vec(rows, &mut r);
    let reg = build_regressor(&u, rows, n).unwrap();
    let y = reg.apply(&ImpulseResponse::from_vector(g).unwrap()).unwrap()
        + DVector::from_vec(gaussian_vec(rows, &mut r)) * 0.1;
    let obj = MarglikObjective::new(reg, y, 0.01, KernelOrder::First).unwrap();
    let opt = optimize_hyperparams(&obj).unwrap();
    assert!(opt.objective <= opt.coarse_objective);
    assert_eq!(neg_log_marglik(opt.lambda, opt.beta, &obj).unwrap(), opt.objective);

    let mut brute = f64::INFINITY;
    for i in 0..80 {
        let beta = 0.05 + 0.94 * i as f64 / 79.0;
        for j in 0..100 {
            let lambda = 10f64.powf(-3.0 + 6.0 * j as f64 / 99.0);
            brute = brute.min(neg_log_marglik(lambda, beta, &obj).unwrap());
        }
    }
    assert!(opt.objective <= brute + 0.1, "{} vs brute force {brute}", opt.objective);
}

#[test]
fn sigma2_estimate_is_unbiased_on_average() {
    let mut r = rng(2);
    let (n, rows, sigma2) = (10, 100, 0.25f64);
    let mut acc = 0.0;
    let reps = 200;
    for _ in 0..reps {
        let u = gaussian_vec(rows, &mut r);
        let reg = build_regressor(&u, rows, n).unwrap();
        let y = DVector::from_vec(gaussian_vec(rows, &mut r)) * sigma2.sqrt();
        acc += estimate_sigma2(&reg, &y).unwrap().sigma2;
    }
    let mean = acc / reps as f64;
    assert!((mean / sigma2 - 1.0).abs() < 0.03, "{mean}");
}

fn quiet_config(seed: u64, snr_divisor: f64) -> ExperimentConfig {
    ExperimentConfig {
        noise: NoiseModel::Mixture { c1: 1.0, variance_ratio: 100.0 },
        snr_divisor,
        master_seed: seed,
        ..ExperimentConfig::default()
    }
}

#[test]
fn ssml_is_near_exact_on_noiseless_fir_data() {
    // Output generated by the truncated response itself, so the FIR model is
    // exact and the only error left is the prior's bias.
    for seed in 0..10 {
        let config = quiet_config(seed, 1e12);
        let data = simulate(&config, &mut RngHandle::new(seed, 0)).unwrap();
        let u = data.dataset.u().to_vec();
        let y = build_regressor(&u, u.len(), config.n).unwrap().apply(&data.truth).unwrap();
        let dataset = Dataset::new(u, y.iter().copied().collect()).unwrap();
        let fit = run_ssml(&dataset, config.n, KernelOrder::First).unwrap();
        let score = fit_score(&data.truth, &fit.g_hat).unwrap();
        assert!(score >= 99.0, "seed {seed}: FIT {score}");
    }
}

#[test]
fn ssml_on_noiseless_system_output() {
    // The simulated output comes from the whole system, so the response
    // beyond n acts as a small model error.
    let scores: Vec<f64> = (0..10)
        .map(|seed| {
            let config = quiet_config(seed, 1e12);
            let data = simulate(&config, &mut RngHandle::new(seed, 0)).unwrap();
            let fit = run_ssml(&data.dataset, config.n, KernelOrder::First).unwrap();
            fit_score(&data.truth, &fit.g_hat).unwrap()
        })
        .collect();
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    assert!(sorted[0] >= 95.0, "{scores:?}");
    assert!((sorted[4] + sorted[5]) / 2.0 >= 99.0, "{scores:?}");
}

#[test]
fn ssgs_is_accurate_at_low_noise() {
    for seed in 0..3 {
        let config = quiet_config(seed, 1e4);
        let data = simulate(&config, &mut RngHandle::new(seed, 0)).unwrap();
        let init = run_ssml(&data.dataset, config.n, KernelOrder::First).unwrap();
        let gibbs = GibbsConfig { iters: 600, burn_in: 200, seed, ..GibbsConfig::default() };
        let (g, _) = run_gibbs(&data.dataset, config.n, KernelOrder::First, &gibbs, &init).unwrap();
        let score = fit_score(&data.truth, &g).unwrap();
        assert!(score >= 95.0, "seed {seed}: FIT {score}");
    }
}

#[test]
fn second_order_kernel_identifies_smooth_response() {
    let n = 40;
    let truth: Vec<f64> = (1..=n).map(|k| {
        let t = k as f64;
        t * 0.85f64.powf(t)
    }).collect();
    let truth = ImpulseResponse::new(truth).unwrap();
    let mut r = rng(4);
    let rows = 300;
    let u = gaussian_vec(rows, &mut r);
    let y = build_regressor(&u, rows, n).unwrap().apply(&truth).unwrap()
        + DVector::from_vec(gaussian_vec(rows, &mut r)) * 0.05;
    let data = Dataset::new(u, y.iter().copied().collect()).unwrap();
    for order in [KernelOrder::First, KernelOrder::Second] {
        let fit = run_ssml(&data, n, order).unwrap();
        assert_eq!(fit.kernel_order, order);
        let score = fit_score(&truth, &fit.g_hat).unwrap();
        assert!(score > 90.0, "{order:?}: {score}");
    }
    // The kernel built at the estimate is a valid covariance.
    let fit = run_ssml(&data, n, KernelOrder::Second).unwrap();
    assert!(build_kernel(KernelSpec::new(KernelOrder::Second, fit.hyper.beta, n).unwrap()).is_ok());
}

#[test]
fn ssml_rejects_short_records() {
    let data = Dataset::new(vec![1.0; 10], vec![0.5; 10]).unwrap();
    assert!(run_ssml(&data, 10, KernelOrder::First).is_err());
    assert!(run_ssml(&data, 20, KernelOrder::First).is_err());
}
