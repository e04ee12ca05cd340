//! Small Monte Carlo comparison of SS-ML and SS-GS under outlier noise.
//!
//! Usage: `cargo run --release --example monte_carlo -- [runs] [N] [wn|lp] [c1]`

use robust_sysid::bench::{run_experiment, ExperimentConfig, InputKind, NoiseModel};

fn main() -> robust_sysid::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config = ExperimentConfig::default();
    if let Some(runs) = args.first() {
        config.runs = runs.parse().expect("runs must be an integer");
    }
    if let Some(n) = args.get(1) {
        config.samples = n.parse().expect("N must be an integer");
    }
    if let Some(kind) = args.get(2) {
        config.input = if kind == "lp" { InputKind::Lp } else { InputKind::Wn };
    }
    if let Some(c1) = args.get(3) {
        config.noise = NoiseModel::Mixture { c1: c1.parse().expect("c1 must be a number"), variance_ratio: 100.0 };
    }

    let start = std::time::Instant::now();
    let report = run_experiment(&config)?;
    println!("run   fit_ssml  fit_ssgs  beta_hat");
    for r in &report.runs {
        println!("{:>3}  {:>8.2}  {:>8.2}  {:>8.3}", r.run, r.fit_ssml, r.fit_ssgs, r.beta_hat);
    }
    let s = &report.summary;
    println!(
        "median FIT: SS-ML {:.2}, SS-GS {:.2}; SS-GS wins {:.0}% ({} failed) in {:.1?}",
        s.ssml.median,
        s.ssgs.median,
        100.0 * s.win_rate,
        s.failed,
        start.elapsed()
    );
    Ok(())
}
