//! SampleSet export: CSV of snapshots plus a JSON metadata sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChainRecord, SampleSet, SamplerConfig};
use crate::circle::Params;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainMeta {
    chain: usize,
    seed: u64,
    snapshots: usize,
    accepted_burn_in: u64,
    proposed_burn_in: u64,
    accepted_kept: u64,
    proposed_kept: u64,
    final_step: f64,
    min_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    params: Params,
    config: SamplerConfig,
    code_version: String,
    wall_time_s: Option<f64>,
    acceptance: f64,
    chains: Vec<ChainMeta>,
}

/// `samples.csv` -> `samples.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

impl SampleSet {
    /// Header `chain,sweep,gap_1,...,gap_N`; floats use shortest round-trip formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.params.n;
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["chain".to_string(), "sweep".to_string()];
        header.extend((1..=n).map(|k| format!("gap_{k}")));
        w.write_record(&header).map_err(csv_err)?;
        let mut row: Vec<String> = Vec::with_capacity(n + 2);
        for c in &self.chains {
            for (k, &sweep) in c.sweeps.iter().enumerate() {
                row.clear();
                row.push(c.chain.to_string());
                row.push(sweep.to_string());
                row.extend(c.snapshot(k, n).iter().map(|g| g.to_string()));
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sidecar(&self, path: &Path, wall_time_s: Option<f64>) -> Result<()> {
        let meta = Sidecar {
            params: self.params,
            config: self.config,
            code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            wall_time_s,
            acceptance: self.acceptance(),
            chains: self
                .chains
                .iter()
                .map(|c| ChainMeta {
                    chain: c.chain,
                    seed: c.seed,
                    snapshots: c.len(),
                    accepted_burn_in: c.accepted_burn_in,
                    proposed_burn_in: c.proposed_burn_in,
                    accepted_kept: c.accepted_kept,
                    proposed_kept: c.proposed_kept,
                    final_step: c.final_step,
                    min_gap: c.min_gap,
                })
                .collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn write(&self, csv_path: &Path, wall_time_s: Option<f64>) -> Result<()> {
        self.write_csv(csv_path)?;
        self.write_sidecar(&sidecar_path(csv_path), wall_time_s)
    }
}

/// Reads a CSV written by [`SampleSet::write_csv`] and its sidecar. Energies are not stored.
pub fn read_samples(csv_path: &Path) -> Result<SampleSet> {
    let meta: Sidecar = serde_json::from_slice(&std::fs::read(sidecar_path(csv_path))?)?;
    let n = meta.params.n;
    let mut chains: Vec<ChainRecord> = meta
        .chains
        .iter()
        .map(|m| ChainRecord {
            chain: m.chain,
            seed: m.seed,
            sweeps: Vec::new(),
            gaps: Vec::new(),
            energies: Vec::new(),
            accepted_burn_in: m.accepted_burn_in,
            proposed_burn_in: m.proposed_burn_in,
            accepted_kept: m.accepted_kept,
            proposed_kept: m.proposed_kept,
            final_step: m.final_step,
            min_gap: m.min_gap,
        })
        .collect();
    let mut r = csv::Reader::from_path(csv_path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?;
    if header.len() != n + 2 || &header[0] != "chain" || &header[1] != "sweep" {
        return Err(Error::Io(format!("unexpected CSV header for n = {n}")));
    }
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| Error::Io(format!("row {}: bad {what}", line + 1));
        let chain: usize = rec[0].parse().map_err(|_| bad("chain"))?;
        let sweep: u64 = rec[1].parse().map_err(|_| bad("sweep"))?;
        let c = chains.iter_mut().find(|c| c.chain == chain).ok_or_else(|| bad("chain id"))?;
        c.sweeps.push(sweep);
        for k in 0..n {
            c.gaps.push(rec[k + 2].parse().map_err(|_| bad("gap"))?);
        }
    }
    for (c, m) in chains.iter().zip(&meta.chains) {
        if c.len() != m.snapshots {
            return Err(Error::Io(format!("chain {} has {} rows, sidecar says {}", c.chain, c.len(), m.snapshots)));
        }
    }
    Ok(SampleSet { params: meta.params, config: meta.config, chains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::run;

    #[test]
    fn csv_round_trip() {
        let p = Params::new(6, 1.5, 2.0).unwrap();
        let c = SamplerConfig { sweeps: 60, burn_in: 20, thin: 4, chains: 2, ..Default::default() };
        let s = run(&p, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        s.write(&path, Some(0.5)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("chain,sweep,gap_1,gap_2,gap_3,gap_4,gap_5,gap_6\n"));
        let back = read_samples(&path).unwrap();
        assert_eq!(back.params, s.params);
        for (a, b) in back.chains.iter().zip(&s.chains) {
            assert_eq!(a.gaps, b.gaps);
            assert_eq!(a.sweeps, b.sweeps);
        }
    }
}
