use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rieszlab::sampler::SamplerConfig;
use rieszlab::Params;
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisWindows {
    pub ks: Vec<usize>,
    pub eps: Vec<f64>,
    pub covariance_lags: (usize, usize),
    pub conditional_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub command: String,
    pub code_version: String,
    pub params: Option<Params>,
    pub sampler: Option<SamplerConfig>,
    pub analysis: Option<AnalysisWindows>,
    /// Command-specific settings not covered above.
    pub options: serde_json::Value,
    /// Per-chain seeds derived from the base seed.
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub outputs: Vec<PathBuf>,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, threads: usize) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            command: command.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            params: None,
            sampler: None,
            analysis: None,
            options: serde_json::Value::Null,
            seeds: Vec::new(),
            threads,
            started_unix: now(),
            finished_unix: None,
            outputs: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| Failure::io(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: RunManifest = serde_json::from_slice(&bytes)?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(Failure::io(format!("manifest version {} is not supported", m.manifest_version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}
