//! Metropolis sampling of the circular Riesz gas in gap coordinates:
//! parallel independent chains, burn-in step adaptation, thinning, checkpoints.

mod chain;
mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::Params;
use crate::error::{Error, Result};

pub use chain::{chain_seed, exact_energy, ChainState, MoveKind, Sampler, SweepStats};
pub use output::{read_samples, sidecar_path};

pub const CHECKPOINT_VERSION: u32 = 1;
/// Tolerance for the periodic energy revalidation.
pub const ENERGY_DRIFT_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub step: f64,
    pub target_accept: f64,
    pub chains: usize,
    pub seed: u64,
    pub moves: MoveKind,
    pub revalidate_every: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            sweeps: 20_000,
            burn_in: 10_000,
            thin: 10,
            step: 0.5,
            target_accept: 0.35,
            chains: 1,
            seed: 1,
            moves: MoveKind::Neighbour,
            revalidate_every: 10_000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::Config("sweeps must be positive".into()));
        }
        if self.burn_in >= self.sweeps {
            return Err(Error::Config(format!(
                "burn-in {} leaves no kept samples out of {} sweeps",
                self.burn_in, self.sweeps
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Config(format!("step = {} must be positive", self.step)));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!("target_accept = {} must lie in (0, 1)", self.target_accept)));
        }
        if self.chains == 0 {
            return Err(Error::Config("at least one chain is needed".into()));
        }
        if self.revalidate_every == 0 {
            return Err(Error::Config("revalidate_every must be positive".into()));
        }
        if self.kept_per_chain() == 0 {
            return Err(Error::Config("thinning leaves no kept samples".into()));
        }
        Ok(())
    }

    pub fn kept_per_chain(&self) -> u64 {
        self.sweeps.saturating_sub(self.burn_in) / self.thin
    }

    fn keeps(&self, sweep: u64) -> bool {
        sweep > self.burn_in && (sweep - self.burn_in) % self.thin == 0
    }
}

/// Kept snapshots and statistics of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub chain: usize,
    pub seed: u64,
    pub sweeps: Vec<u64>,
    /// Row-major, one row of N gaps per kept sweep.
    #[serde(with = "crate::bits::vec")]
    pub gaps: Vec<f64>,
    #[serde(with = "crate::bits::vec")]
    pub energies: Vec<f64>,
    pub accepted_burn_in: u64,
    pub proposed_burn_in: u64,
    pub accepted_kept: u64,
    pub proposed_kept: u64,
    #[serde(with = "crate::bits::scalar")]
    pub final_step: f64,
    #[serde(with = "crate::bits::scalar")]
    pub min_gap: f64,
}

impl ChainRecord {
    fn new(chain: usize, seed: u64) -> Self {
        ChainRecord {
            chain,
            seed,
            sweeps: Vec::new(),
            gaps: Vec::new(),
            energies: Vec::new(),
            accepted_burn_in: 0,
            proposed_burn_in: 0,
            accepted_kept: 0,
            proposed_kept: 0,
            final_step: 0.0,
            min_gap: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.sweeps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }

    pub fn snapshot(&self, k: usize, n: usize) -> &[f64] {
        &self.gaps[k * n..(k + 1) * n]
    }

    /// Post-burn-in acceptance rate.
    pub fn acceptance(&self) -> f64 {
        if self.proposed_kept == 0 {
            0.0
        } else {
            self.accepted_kept as f64 / self.proposed_kept as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub params: Params,
    pub config: SamplerConfig,
    pub chains: Vec<ChainRecord>,
}

impl SampleSet {
    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn total_snapshots(&self) -> usize {
        self.chains.iter().map(|c| c.len()).sum()
    }

    /// All snapshots, chain by chain.
    pub fn snapshots(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let n = self.params.n;
        self.chains.iter().flat_map(move |c| c.gaps.chunks_exact(n))
    }

    pub fn acceptance(&self) -> f64 {
        let a: u64 = self.chains.iter().map(|c| c.accepted_kept).sum();
        let p: u64 = self.chains.iter().map(|c| c.proposed_kept).sum();
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    pub fn min_gap(&self) -> f64 {
        self.chains.iter().map(|c| c.min_gap).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainProgress {
    state: ChainState,
    record: ChainRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub params: Params,
    pub config: SamplerConfig,
    chains: Vec<ChainProgress>,
}

impl Checkpoint {
    /// Sweeps completed by every chain.
    pub fn sweep(&self) -> u64 {
        self.chains.iter().map(|c| c.state.sweep).min().unwrap_or(0)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("checkpoint version {} is not supported", cp.version)));
        }
        Ok(cp)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunControl {
    pub resume: Option<Checkpoint>,
    /// Stop once every chain has completed this many sweeps.
    pub stop_after: Option<u64>,
    /// Write a checkpoint here every `checkpoint_every` sweeps and when stopping.
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Finished(SampleSet),
    Stopped(Checkpoint),
}

/// Robbins–Monro gain for burn-in sweep t (1-based).
fn gain(t: u64) -> f64 {
    (t as f64).powf(-0.6)
}

fn advance(sampler: &Sampler, cfg: &SamplerConfig, p: &mut ChainProgress, until: u64) -> Result<()> {
    let n = sampler.params().n;
    let mut scratch = Vec::with_capacity(n * n);
    while p.state.sweep < until {
        let stats = sampler.sweep(&mut p.state, &mut scratch);
        let t = p.state.sweep;
        if t <= cfg.burn_in {
            p.record.accepted_burn_in += stats.accepted;
            p.record.proposed_burn_in += stats.proposed;
            let rate = stats.accepted as f64 / stats.proposed as f64;
            let log_step = p.state.step.ln() + gain(t) * (rate - cfg.target_accept);
            p.state.step = log_step.exp().clamp(1e-9, n as f64);
        } else {
            p.record.accepted_kept += stats.accepted;
            p.record.proposed_kept += stats.proposed;
        }
        if t % cfg.revalidate_every == 0 {
            sampler.revalidate(&mut p.state, ENERGY_DRIFT_RTOL)?;
        }
        if cfg.keeps(t) {
            let gaps = p.state.gaps();
            let m = gaps.iter().copied().fold(f64::INFINITY, f64::min);
            p.record.min_gap = p.record.min_gap.min(m);
            p.record.sweeps.push(t);
            p.record.gaps.extend_from_slice(&gaps);
            p.record.energies.push(p.state.energy);
        }
    }
    p.record.final_step = p.state.step;
    Ok(())
}

pub fn run(params: &Params, cfg: &SamplerConfig) -> Result<SampleSet> {
    match run_with(params, cfg, RunControl::default())? {
        RunOutcome::Finished(s) => Ok(s),
        RunOutcome::Stopped(_) => unreachable!("no stop requested"),
    }
}

pub fn run_with(params: &Params, cfg: &SamplerConfig, ctl: RunControl) -> Result<RunOutcome> {
    params.validate()?;
    cfg.validate()?;
    let sampler = Sampler::new(*params, cfg.moves)?;
    let mut chains: Vec<ChainProgress> = match ctl.resume {
        Some(cp) => {
            if cp.params != *params || cp.config != *cfg {
                return Err(Error::Config("checkpoint was written for different parameters".into()));
            }
            let mut chains = cp.chains;
            for c in chains.iter_mut() {
                sampler.attach(&mut c.state)?;
            }
            chains
        }
        None => (0..cfg.chains)
            .map(|k| {
                let seed = chain_seed(cfg.seed, k as u64);
                Ok(ChainProgress { state: sampler.init_chain(seed, cfg.step)?, record: ChainRecord::new(k, seed) })
            })
            .collect::<Result<_>>()?,
    };
    let target = ctl.stop_after.map_or(cfg.sweeps, |s| s.min(cfg.sweeps));
    let every = ctl.checkpoint_every.filter(|_| ctl.checkpoint.is_some()).unwrap_or(u64::MAX);
    let started = Instant::now();
    let mut done = chains.iter().map(|c| c.state.sweep).min().unwrap_or(0);
    while done < target {
        let next = if every == u64::MAX { target } else { ((done / every + 1) * every).min(target) };
        chains.par_iter_mut().try_for_each(|c| advance(&sampler, cfg, c, next))?;
        done = next;
        log::info!("{done}/{} sweeps, {:.1}s", cfg.sweeps, started.elapsed().as_secs_f64());
        if let Some(path) = &ctl.checkpoint {
            if done < cfg.sweeps && (done % every == 0 || done == target) {
                checkpoint_of(params, cfg, &chains).save(path)?;
            }
        }
    }
    if done < cfg.sweeps {
        return Ok(RunOutcome::Stopped(checkpoint_of(params, cfg, &chains)));
    }
    Ok(RunOutcome::Finished(SampleSet { params: *params, config: *cfg, chains: chains.into_iter().map(|c| c.record).collect() }))
}

fn checkpoint_of(params: &Params, cfg: &SamplerConfig, chains: &[ChainProgress]) -> Checkpoint {
    Checkpoint { version: CHECKPOINT_VERSION, params: *params, config: *cfg, chains: chains.to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (Params, SamplerConfig) {
        let p = Params::new(12, 0.5, 1.0).unwrap();
        let c = SamplerConfig { sweeps: 300, burn_in: 100, thin: 5, chains: 3, seed: 99, revalidate_every: 50, ..Default::default() };
        (p, c)
    }

    #[test]
    fn config_errors() {
        let bad = SamplerConfig { sweeps: 10, burn_in: 20, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = SamplerConfig { thin: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig { target_accept: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig { sweeps: 20, burn_in: 10, thin: 11, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn run_is_deterministic() {
        let (p, c) = small();
        let a = run(&p, &c).unwrap();
        let b = run(&p, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_snapshots(), 3 * 40);
        for snap in a.snapshots() {
            assert!(snap.iter().all(|&g| g > 0.0));
            assert!((snap.iter().sum::<f64>() - 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn resume_is_bitwise() {
        let (p, c) = small();
        let full = run(&p, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        let ctl = RunControl { stop_after: Some(137), checkpoint: Some(path.clone()), checkpoint_every: Some(60), ..Default::default() };
        let RunOutcome::Stopped(cp) = run_with(&p, &c, ctl).unwrap() else { panic!("expected a stop") };
        assert_eq!(cp.sweep(), 137);
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.sweep(), 137);
        let RunOutcome::Finished(resumed) = run_with(&p, &c, RunControl { resume: Some(loaded), ..Default::default() }).unwrap() else {
            panic!("expected completion")
        };
        assert_eq!(full, resumed);
    }

    #[test]
    fn resume_rejects_other_params() {
        let (p, c) = small();
        let ctl = RunControl { stop_after: Some(10), ..Default::default() };
        let RunOutcome::Stopped(cp) = run_with(&p, &c, ctl).unwrap() else { panic!() };
        let other = Params::new(12, 0.7, 1.0).unwrap();
        assert!(matches!(run_with(&other, &c, RunControl { resume: Some(cp), ..Default::default() }), Err(Error::Config(_))));
    }

    #[test]
    fn adaptation_reaches_target() {
        let p = Params::new(128, 0.5, 1.0).unwrap();
        let c = SamplerConfig { sweeps: 3000, burn_in: 1000, thin: 50, chains: 1, ..Default::default() };
        let s = run(&p, &c).unwrap();
        let acc = s.acceptance();
        assert!((acc - 0.35).abs() < 0.1, "{acc}");
    }

    #[test]
    fn flat_target_accepts_nearly_everything() {
        let p = Params::new(16, 0.5, 1e-12).unwrap();
        let c = SamplerConfig { sweeps: 200, burn_in: 1, thin: 1, step: 0.05, target_accept: 0.99, ..Default::default() };
        let s = run(&p, &c).unwrap();
        assert!(s.acceptance() > 0.97, "{}", s.acceptance());
    }
}
