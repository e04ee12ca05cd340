//! A short record with a handful of gross outliers: where the Gaussian
//! noise model breaks down and the Laplacian one does not.

use robust_sysid::bench::{run_single, ExperimentConfig, NoiseModel};

fn main() -> robust_sysid::Result<()> {
    println!("seed  SS-ML   SS-GS");
    for seed in 0..10 {
        let config = ExperimentConfig {
            runs: 1,
            samples: 100,
            noise: NoiseModel::ForcedOutliers { count: 5, variance_ratio: 100.0 },
            master_seed: seed,
            ..ExperimentConfig::default()
        };
        let r = run_single(&config, 0)?;
        println!("{seed:>4} {:>6.2} {:>7.2}", r.fit_ssml, r.fit_ssgs);
    }
    Ok(())
}
