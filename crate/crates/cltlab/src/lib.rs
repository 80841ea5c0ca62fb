//! Batch runner for the cltlab-core experiments: TOML config in, CSV and a
//! run manifest out, SVG plots from the CSV.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub mod config;
pub mod experiments;
pub mod plot;
pub mod selftest;
pub mod table;

pub use config::{Experiment, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("computation failed: {0}")]
    Compute(cltlab_core::CoreError),
    #[error("non-finite value {0} in output")]
    NonFinite(f64),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Self::Io(io),
            other => Self::MalformedCsv(format!("{other:?}")),
        }
    }
}

impl CliError {
    /// 2 for bad input (config, model, CSV), 3 for failed computations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::UnknownModel(_) | Self::MalformedCsv(_) => 2,
            Self::Compute(_) | Self::NonFinite(_) | Self::Io(_) => 3,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_hash: String,
    pub cltlab_version: String,
    pub core_version: String,
    pub wall_time_seconds: f64,
    pub csv: String,
    pub rows: usize,
    pub config: ExperimentConfig,
}

#[derive(Debug)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub rows: usize,
}

/// Runs one experiment and writes `<experiment>.csv` plus `<experiment>.manifest.toml`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let table = experiments::run_experiment(cfg)?;
    let csv_text = table.to_csv_string()?;
    let dir = cfg.resolve_output_dir();
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join(format!("{}.csv", cfg.experiment));
    std::fs::write(&csv, csv_text)?;
    let manifest = Manifest {
        experiment: cfg.experiment.to_string(),
        config_hash: cfg.hash(),
        cltlab_version: env!("CARGO_PKG_VERSION").into(),
        core_version: cltlab_core::VERSION.into(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        csv: file_name(&csv),
        rows: table.rows.len(),
        config: cfg.clone(),
    };
    let manifest_path = dir.join(format!("{}.manifest.toml", cfg.experiment));
    let text = toml::to_string(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&manifest_path, text)?;
    Ok(RunOutput { csv, manifest: manifest_path, rows: table.rows.len() })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
