//! The run configuration file: one JSON document shared by all subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gridcf::month::YearMonth;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub ingest: IngestConfig,
    pub counterfactual: CounterfactualConfig,
    pub market: MarketConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub generation_csv: PathBuf,
    pub degree_days_csv: PathBuf,
    pub factors_csv: PathBuf,
    #[serde(default = "default_true")]
    pub contiguous_only: bool,
    pub window_start: YearMonth,
    pub window_end: YearMonth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterfactualConfig {
    pub targets: Vec<String>,
    pub train_start: YearMonth,
    pub train_end: YearMonth,
    pub forecast_start: YearMonth,
    pub forecast_end: YearMonth,
    #[serde(default = "default_covariates")]
    pub covariates: Vec<String>,
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    #[serde(default)]
    pub fuel_split: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketConfig {
    pub units_csv: PathBuf,
    pub hourly_csv_by_zone: std::collections::BTreeMap<String, PathBuf>,
    pub forecasts_csv: PathBuf,
    pub capacity_csv: PathBuf,
}

fn default_true() -> bool {
    true
}

fn default_covariates() -> Vec<String> {
    vec!["hdd".into(), "cdd".into()]
}

fn default_restarts() -> usize {
    5
}

/// A parsed config plus the provenance every output embeds: the SHA-256 of
/// the config file bytes and the effective seed.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub config_sha256: String,
    /// Directory the config file lives in; relative input paths resolve
    /// against it.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
        let config_sha256 = hex::encode(Sha256::digest(&bytes));
        let base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        Ok(Self {
            config,
            config_sha256,
            base_dir,
        })
    }

    /// Resolves an input path from the config against the config's own
    /// directory and checks it exists.
    pub fn input(&self, p: &Path) -> Result<PathBuf, CliError> {
        let resolved = if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        };
        if !resolved.exists() {
            return Err(CliError::Config(format!(
                "input file {} does not exist",
                resolved.display()
            )));
        }
        Ok(resolved)
    }
}
