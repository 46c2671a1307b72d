//! TOML configuration file. Values here override built-in defaults and are
//! overridden by command-line flags.
//!
//! ```toml
//! threads = 4
//!
//! [params]
//! n = 128
//! s = 0.5
//! beta = 1.0
//!
//! [sampler]          # any SamplerConfig field
//! sweeps = 200000
//! burn_in = 20000
//! moves = "Neighbour"
//!
//! [analysis]
//! ks = [4, 8, 16, 32, 64]
//! eps = [0.2, 0.1, 0.05]
//! conditional_pairs = 20000
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    #[serde(default)]
    pub params: PartialParams,
    #[serde(default)]
    pub sampler: toml::Table,
    #[serde(default)]
    pub analysis: AnalysisFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialParams {
    pub n: Option<usize>,
    pub s: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisFile {
    pub ks: Option<Vec<usize>>,
    pub eps: Option<Vec<f64>>,
    pub conditional_pairs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
    }
}

/// `base` with the keys of `table` replaced.
pub fn overlay<T: Clone + Serialize + DeserializeOwned>(base: &T, table: &toml::Table) -> CliResult<T> {
    if table.is_empty() {
        return Ok(base.clone());
    }
    let err = |e: &dyn std::fmt::Display| Failure::usage(format!("config: {e}"));
    let mut merged = match toml::Value::try_from(base).map_err(|e| err(&e))? {
        toml::Value::Table(t) => t,
        _ => return Err(Failure::usage("config: section is not a table")),
    };
    for (k, v) in table {
        if !merged.contains_key(k) {
            return Err(Failure::usage(format!("config: unknown key '{k}'")));
        }
        merged.insert(k.clone(), v.clone());
    }
    toml::Value::Table(merged).try_into().map_err(|e| err(&e))
}

pub fn pick<T>(flag: Option<T>, file: Option<T>, base: Option<T>, name: &str) -> CliResult<T> {
    flag.or(file).or(base).ok_or_else(|| Failure::usage(format!("missing required value --{name}")))
}
