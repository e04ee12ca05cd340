//! Writes a simulated dataset and its truth to disk, reads them back and
//! identifies from the files, as the CLI does.

use robust_sysid::bench::{simulate, ExperimentConfig};
use robust_sysid::dist::RngHandle;
use robust_sysid::io::{read_dataset, read_truth, write_dataset, write_truth, DatasetMeta, TruthDocument, SCHEMA_VERSION};
use robust_sysid::model::fit_score;
use robust_sysid::ssml::run_ssml;
use robust_sysid::KernelOrder;

fn main() -> robust_sysid::Result<()> {
    let config = ExperimentConfig { samples: 120, n: 30, ..ExperimentConfig::default() };
    let data = simulate(&config, &mut RngHandle::new(1, 0))?;

    let dir = std::env::temp_dir().join(format!("robust-sysid-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let csv = dir.join("data.csv");
    let json = dir.join("truth.json");
    let meta = DatasetMeta { seed: Some(1), config: serde_json::to_value(&config).ok() };
    write_dataset(&csv, &data.dataset, &meta)?;
    write_truth(
        &json,
        &TruthDocument {
            schema_version: SCHEMA_VERSION,
            seed: Some(1),
            config: Some(config.clone()),
            impulse_response: data.truth.to_vec(),
            system: Some(data.system.clone()),
            sigma2: Some(data.sigma2),
            outliers: data.outliers.clone(),
        },
    )?;

    let (dataset, meta) = read_dataset(&csv)?;
    let truth = read_truth(&json)?.impulse_response()?;
    assert_eq!(dataset, data.dataset);
    println!("read {} samples (seed {:?}) from {}", dataset.len(), meta.seed, csv.display());
    let fit = run_ssml(&dataset, truth.len(), KernelOrder::First)?;
    println!("SS-ML FIT from files: {:.2}", fit_score(&truth, &fit.g_hat)?);
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
