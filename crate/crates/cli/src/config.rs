use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use fcd_core::ingestion::SchemeKind;
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Values from a `--config` file. Keys are the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub scenario: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
    pub route: Option<String>,
    pub date: Option<NaiveDate>,
    pub c_free: Option<f64>,
    pub c_cong: Option<f64>,
    pub v_c: Option<f64>,
    pub delta_v: Option<f64>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub from: Option<String>,
    pub to: Option<String>,
    pub scheme: Option<SchemeKind>,
    pub alpha: Option<f64>,
    pub runs: Option<usize>,
    pub departure: Option<String>,
    pub sweep_step: Option<u32>,
    pub sweep_start: Option<String>,
    pub sweep_end: Option<String>,
    pub strategy: Option<String>,
    pub all_strategies: Option<bool>,
    pub custom_dates: Option<Vec<NaiveDate>>,
    pub exclude_dates: Option<Vec<NaiveDate>>,
    pub any_weekday: Option<bool>,
    pub k: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(CliError::NotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// The flag value if given, otherwise the config value.
pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>) -> Option<T> {
    flag.or_else(|| file.clone())
}

/// Like [`pick`] for switches: set by either source.
pub fn pick_switch(flag: bool, file: Option<bool>) -> bool {
    flag || file.unwrap_or(false)
}
