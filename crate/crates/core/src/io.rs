//! File formats.
//!
//! * Datasets and per-run tables are comma-separated text. Leading `# key: value`
//!   lines carry metadata (schema version, generating config, seed); the
//!   first non-comment line is the header.
//! * Truth, result and summary documents are JSON. Floats are written in
//!   shortest round-trip form, so reading a file back reproduces every value
//!   bit for bit.
//!
//! Every document carries `schema_version` and enough of the generating
//! configuration to reproduce it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::{ExperimentConfig, RunFailure, RunResult, Summary, TransferFunction};
use crate::error::{Error, Result};
use crate::gibbs::{GammaRateConvention, QuantileReport};
use crate::kernel::KernelOrder;
use crate::model::{Dataset, ImpulseResponse};

pub const SCHEMA_VERSION: u32 = 1;

const DATASET_HEADER: [&str; 3] = ["t", "u", "y"];
const RUNS_HEADER: [&str; 6] = ["run", "fit_ssml", "fit_ssgs", "beta_hat", "sigma2", "warnings"];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, message: message.into() }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

/// Writes `# key: value` lines.
fn write_metadata<W: Write>(w: &mut W, path: &Path, meta: &[(&str, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Collects the leading `# key: value` lines of a text file.
fn read_metadata(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.trim_start_matches('#').split_once(':')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn check_schema(path: &Path, line: u64, version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(parse_err(
            path,
            line,
            format!("unsupported schema_version {version}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(path, line, e.to_string())
}

fn check_header(path: &Path, rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let line = header.position().map_or(1, |p| p.line());
    if header.iter().ne(expected.iter().copied()) {
        return Err(parse_err(
            path,
            line,
            format!("expected header `{}`, found `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| parse_err(path, line, format!("column `{name}`: cannot parse `{raw}`")))
}

/// Metadata stored in a dataset header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    /// Generating configuration as a JSON object.
    pub config: Option<serde_json::Value>,
}

/// Writes `t,u,y` rows with `t = 1..N`.
pub fn write_dataset(path: &Path, data: &Dataset, meta: &DatasetMeta) -> Result<()> {
    let mut w = create(path)?;
    let mut lines = vec![("schema_version", SCHEMA_VERSION.to_string())];
    if let Some(seed) = meta.seed {
        lines.push(("seed", seed.to_string()));
    }
    if let Some(config) = &meta.config {
        lines.push(("config", config.to_string()));
    }
    write_metadata(&mut w, path, &lines)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(DATASET_HEADER).map_err(|e| csv_error(path, e))?;
    for (t, (u, y)) in data.u().iter().zip(data.y()).enumerate() {
        out.write_record([(t + 1).to_string(), u.to_string(), y.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads a dataset. Errors name the offending line.
///
/// Rows must be in time order with consecutive `t`; all values must be
/// finite.
pub fn read_dataset(path: &Path) -> Result<(Dataset, DatasetMeta)> {
    let text = read_text(path)?;
    let mut meta = DatasetMeta::default();
    for (i, (k, v)) in read_metadata(&text).into_iter().enumerate() {
        let line = i as u64 + 1;
        match k.as_str() {
            "schema_version" => check_schema(path, line, parse_field(path, line, "schema_version", &v)?)?,
            "seed" => meta.seed = Some(parse_field(path, line, "seed", &v)?),
            "config" => {
                meta.config = Some(
                    serde_json::from_str(&v).map_err(|e| parse_err(path, line, format!("config: {e}")))?,
                )
            }
            _ => {}
        }
    }

    let mut rdr = csv_reader(&text);
    check_header(path, &mut rdr, &DATASET_HEADER)?;
    let (mut u, mut y) = (Vec::new(), Vec::new());
    let mut first_t: Option<i64> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let t: i64 = parse_field(path, line, "t", &record[0])?;
        let start = *first_t.get_or_insert(t);
        if t != start + u.len() as i64 {
            return Err(parse_err(path, line, format!("expected t = {}, found {t}", start + u.len() as i64)));
        }
        let uv: f64 = parse_field(path, line, "u", &record[1])?;
        let yv: f64 = parse_field(path, line, "y", &record[2])?;
        if !(uv.is_finite() && yv.is_finite()) {
            return Err(parse_err(path, line, "non-finite sample"));
        }
        u.push(uv);
        y.push(yv);
    }
    if u.is_empty() {
        return Err(parse_err(path, 0, "dataset has no samples"));
    }
    Ok((Dataset::new(u, y)?, meta))
}

fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, doc)
        .map_err(|e| Error::Numeric { context: "json output", message: e.to_string() })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let doc: T = serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))?;
    Ok(doc)
}

/// Ground truth behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub config: Option<ExperimentConfig>,
    /// `g(1..n)`.
    pub impulse_response: Vec<f64>,
    pub system: Option<TransferFunction>,
    pub sigma2: Option<f64>,
    /// 0-based sample indices drawn from the high-variance component.
    pub outliers: Vec<usize>,
}

impl TruthDocument {
    pub fn impulse_response(&self) -> Result<ImpulseResponse> {
        ImpulseResponse::new(self.impulse_response.clone())
    }
}

pub fn write_truth(path: &Path, doc: &TruthDocument) -> Result<()> {
    write_json(path, doc)
}

pub fn read_truth(path: &Path) -> Result<TruthDocument> {
    let doc: TruthDocument = read_json(path)?;
    check_schema(path, 1, doc.schema_version)?;
    if doc.impulse_response.is_empty() || doc.impulse_response.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(path, 1, "impulse_response must be a non-empty list of finite numbers"));
    }
    Ok(doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ssml,
    Ssgs,
    #[default]
    Both,
}

impl Estimator {
    pub fn runs_ssgs(self) -> bool {
        matches!(self, Estimator::Ssgs | Estimator::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmlEstimate {
    pub g_hat: Vec<f64>,
    pub lambda: f64,
    pub beta: f64,
    pub sigma2: f64,
    /// Minimized `−2 log p(y | λ, β)` up to a constant.
    pub objective: f64,
    pub fit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsgsEstimate {
    pub g_hat: Vec<f64>,
    /// Shared with the SS-ML stage that initializes the chain.
    pub beta: f64,
    pub sigma2: f64,
    /// Posterior mean of `λ` over the averaged sweeps.
    pub lambda_mean: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub gamma_rate: GammaRateConvention,
    pub diagnostics: Option<QuantileReport>,
    pub fit: Option<f64>,
}

/// How an identification result was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyConfig {
    pub input: String,
    pub truth: Option<String>,
    pub estimator: Estimator,
    pub n: usize,
    pub kernel: KernelOrder,
    pub iters: usize,
    pub burn_in: usize,
    pub gamma_rate: GammaRateConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub seed: u64,
    pub config: IdentifyConfig,
    /// Records used (`N`).
    pub samples: usize,
    /// Present whenever SS-GS ran, since SS-GS starts from it.
    pub ssml: Option<SsmlEstimate>,
    pub ssgs: Option<SsgsEstimate>,
    pub warnings: Vec<String>,
}

pub fn write_result(path: &Path, doc: &ResultDocument) -> Result<()> {
    write_json(path, doc)
}

pub fn read_result(path: &Path) -> Result<ResultDocument> {
    let doc: ResultDocument = read_json(path)?;
    check_schema(path, 1, doc.schema_version)?;
    Ok(doc)
}

/// One line per run, in run order.
pub fn write_runs(path: &Path, config: &ExperimentConfig, runs: &[RunResult]) -> Result<()> {
    let mut w = create(path)?;
    let config_json = serde_json::to_string(config)
        .map_err(|e| Error::Numeric { context: "csv output", message: e.to_string() })?;
    write_metadata(
        &mut w,
        path,
        &[
            ("schema_version", SCHEMA_VERSION.to_string()),
            ("seed", config.master_seed.to_string()),
            ("config", config_json),
        ],
    )?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RUNS_HEADER).map_err(|e| csv_error(path, e))?;
    for r in runs {
        out.write_record([
            r.run.to_string(),
            r.fit_ssml.to_string(),
            r.fit_ssgs.to_string(),
            r.beta_hat.to_string(),
            r.sigma2.to_string(),
            r.warnings.join("; "),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// One row of a runs table as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub run: usize,
    pub fit_ssml: f64,
    pub fit_ssgs: f64,
    pub beta_hat: f64,
    pub sigma2: f64,
    pub warnings: String,
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRow>> {
    let text = read_text(path)?;
    let mut rdr = csv_reader(&text);
    check_header(path, &mut rdr, &RUNS_HEADER)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(RunRow {
            run: parse_field(path, line, "run", &record[0])?,
            fit_ssml: parse_field(path, line, "fit_ssml", &record[1])?,
            fit_ssgs: parse_field(path, line, "fit_ssgs", &record[2])?,
            beta_hat: parse_field(path, line, "beta_hat", &record[3])?,
            sigma2: parse_field(path, line, "sigma2", &record[4])?,
            warnings: record[5].to_string(),
        });
    }
    Ok(rows)
}

/// Benchmark summary with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub schema_version: u32,
    pub seed: u64,
    /// Short label such as `N=200 input=wn`.
    pub experiment: String,
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub failures: Vec<RunFailure>,
}

impl SummaryDocument {
    pub fn new(config: &ExperimentConfig, summary: Summary, failures: Vec<RunFailure>) -> Self {
        let input = serde_json::to_value(config.input)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        Self {
            schema_version: SCHEMA_VERSION,
            seed: config.master_seed,
            experiment: format!("N={} input={input}", config.samples),
            config: config.clone(),
            summary,
            failures,
        }
    }
}

pub fn write_summary(path: &Path, doc: &SummaryDocument) -> Result<()> {
    write_json(path, doc)
}

pub fn read_summary(path: &Path) -> Result<SummaryDocument> {
    let doc: SummaryDocument = read_json(path)?;
    check_schema(path, 1, doc.schema_version)?;
    Ok(doc)
}
