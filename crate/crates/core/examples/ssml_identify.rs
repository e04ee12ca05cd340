//! SS-ML on a simulated system with Gaussian noise only.

use robust_sysid::bench::{simulate, ExperimentConfig, NoiseModel};
use robust_sysid::dist::RngHandle;
use robust_sysid::model::fit_score;
use robust_sysid::ssml::run_ssml;
use robust_sysid::KernelOrder;

fn main() -> robust_sysid::Result<()> {
    let config = ExperimentConfig {
        noise: NoiseModel::Mixture { c1: 1.0, variance_ratio: 100.0 },
        ..ExperimentConfig::default()
    };
    let data = simulate(&config, &mut RngHandle::new(3, 0))?;
    let fit = run_ssml(&data.dataset, config.n, KernelOrder::First)?;
    let h = &fit.hyper;
    println!("lambda = {:.4e}, beta = {:.4}, sigma2 = {:.4e} (true {:.4e})", h.lambda, h.beta, h.sigma2, data.sigma2);
    println!("FIT = {:.2}", fit_score(&data.truth, &fit.g_hat)?);
    println!(" k     true   estimate");
    for (k, (t, e)) in data.truth.as_slice().iter().zip(fit.g_hat.as_slice()).enumerate().take(15) {
        println!("{:>2} {t:>8.4} {e:>10.4}", k + 1);
    }
    Ok(())
}
