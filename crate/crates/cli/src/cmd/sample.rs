use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use rieszlab::sampler::{chain_seed, run_with, Checkpoint, MoveKind, RunControl, RunOutcome, SamplerConfig};
use rieszlab::Params;

use super::create_dir;
use crate::config::{overlay, pick, FileConfig};
use crate::failure::{CliResult, Failure};
use crate::manifest::{now, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Moves {
    Neighbour,
    AnyPair,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    /// Initial proposal step in gap units.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    target_accept: Option<f64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    moves: Option<Moves>,
    #[arg(long)]
    revalidate_every: Option<u64>,
    /// Output directory for samples.csv, samples.json, manifest.json and checkpoints.
    #[arg(long)]
    out_dir: PathBuf,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    /// Stop after this many sweeps and leave a checkpoint.
    #[arg(long)]
    stop_after: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
}

pub fn run(a: SampleArgs, file: &FileConfig, threads: usize) -> CliResult<()> {
    let manifest_path = a.out_dir.join("manifest.json");
    let checkpoint_path = a.out_dir.join("checkpoint.json");
    let previous = if a.resume { Some(RunManifest::load(&manifest_path)?) } else { None };
    let base_params = previous.as_ref().and_then(|m| m.params);
    let base_cfg = previous.as_ref().and_then(|m| m.sampler).unwrap_or_default();

    let params = Params::new(
        pick(a.n, file.params.n, base_params.map(|p| p.n), "n")?,
        pick(a.s, file.params.s, base_params.map(|p| p.s), "s")?,
        pick(a.beta, file.params.beta, base_params.map(|p| p.beta).or(Some(1.0)), "beta")?,
    )?;
    let mut cfg: SamplerConfig = overlay(&base_cfg, &file.sampler)?;
    macro_rules! flag {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { cfg.$f = v; } )* };
    }
    flag!(sweeps, burn_in, thin, step, target_accept, chains, seed, revalidate_every);
    if let Some(m) = a.moves {
        cfg.moves = match m {
            Moves::Neighbour => MoveKind::Neighbour,
            Moves::AnyPair => MoveKind::AnyPair,
        };
    }
    cfg.validate()?;

    let resume = match &previous {
        Some(m) => {
            if m.params != Some(params) || m.sampler != Some(cfg) {
                return Err(Failure::io(format!(
                    "resume settings differ from {}: recorded {:?} / {:?}",
                    manifest_path.display(),
                    m.params,
                    m.sampler
                )));
            }
            let cp = Checkpoint::load(&checkpoint_path).map_err(|e| Failure::io(e.to_string()))?;
            log::info!("resuming at sweep {}", cp.sweep());
            Some(cp)
        }
        None => None,
    };

    create_dir(&a.out_dir)?;
    let csv = a.out_dir.join("samples.csv");
    let mut manifest = previous.clone().unwrap_or_else(|| RunManifest::new("sample", threads));
    manifest.params = Some(params);
    manifest.sampler = Some(cfg);
    manifest.seeds = (0..cfg.chains as u64).map(|k| chain_seed(cfg.seed, k)).collect();
    manifest.threads = threads;
    manifest.outputs = vec![csv.clone(), rieszlab::sampler::sidecar_path(&csv)];
    manifest.save(&manifest_path)?;

    let started = Instant::now();
    let ctl = RunControl {
        resume,
        stop_after: a.stop_after,
        checkpoint: Some(checkpoint_path.clone()),
        checkpoint_every: a.checkpoint_every,
    };
    match run_with(&params, &cfg, ctl)? {
        RunOutcome::Finished(set) => {
            set.write(&csv, Some(started.elapsed().as_secs_f64()))?;
            if checkpoint_path.exists() {
                std::fs::remove_file(&checkpoint_path)?;
            }
            manifest.finished_unix = Some(now());
            manifest.save(&manifest_path)?;
            log::info!(
                "{} snapshots from {} chains, acceptance {:.3}, min gap {:.3e} -> {}",
                set.total_snapshots(),
                set.chains.len(),
                set.acceptance(),
                set.min_gap(),
                csv.display()
            );
        }
        RunOutcome::Stopped(cp) => {
            log::info!("stopped at sweep {}; continue with --resume", cp.sweep());
        }
    }
    Ok(())
}
