use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rieszlab::analysis::{
    convergence_compare, dyadic_blocks, gap_lag_covariance, observable_estimate, repulsion_tail, rigidity_profile,
    variance_scaling, Observable, TailOptions,
};
use rieszlab::meanfield::predicted_gap_covariance;
use rieszlab::sampler::{read_samples, SampleSet};
use serde::Serialize;
use serde_json::json;

use super::{create_dir, create_file, print_checks, verdict, write_json, Check};
use crate::config::FileConfig;
use crate::failure::{CliResult, Failure};
use crate::manifest::{now, AnalysisWindows, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Covariance,
    VarianceScaling,
    Rigidity,
    Tail,
    Observables,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// samples.csv written by `sample` (its .json sidecar must sit next to it).
    #[arg(long)]
    samples: PathBuf,
    /// Estimators to run (default: all).
    #[arg(long, value_enum, value_delimiter = ',')]
    estimator: Vec<Estimator>,
    /// Second sample file at a different N for a convergence comparison.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Block sizes for variance scaling.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Decreasing ε grid for small-gap probabilities.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    conditional_pairs: Option<usize>,
    /// Report directory (default: the directory of the sample file).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn load(path: &Path) -> CliResult<SampleSet> {
    let set = read_samples(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    if set.total_snapshots() == 0 {
        return Err(Failure::io(format!("{} holds no snapshots", path.display())));
    }
    Ok(set)
}

/// With the default estimator set, estimators the data cannot support are skipped.
fn soft<T>(r: rieszlab::Result<T>, lenient: bool, name: &str, summary: &mut serde_json::Map<String, serde_json::Value>) -> CliResult<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (rieszlab::Error::InsufficientData(_) | rieszlab::Error::Usage(_))) if lenient => {
            log::warn!("skipping {name}: {e}");
            summary.insert(name.into(), json!({ "skipped": e.to_string() }));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn default_ks(n: usize) -> Vec<usize> {
    let ks: Vec<usize> = dyadic_blocks(n).into_iter().filter(|&k| k >= 4 && k <= 64.min(n / 8)).collect();
    if ks.len() >= 2 {
        ks
    } else {
        dyadic_blocks(n)
    }
}

pub fn run(a: AnalyzeArgs, file: &FileConfig, threads: usize) -> CliResult<()> {
    let set = load(&a.samples)?;
    let p = set.params;
    let n = p.n;
    let lenient = a.estimator.is_empty();
    let estimators = if lenient {
        vec![Estimator::Covariance, Estimator::VarianceScaling, Estimator::Rigidity, Estimator::Tail, Estimator::Observables]
    } else {
        a.estimator.clone()
    };
    let ks = a.ks.clone().or_else(|| file.analysis.ks.clone()).unwrap_or_else(|| default_ks(n));
    let eps = a.eps.clone().or_else(|| file.analysis.eps.clone()).unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
    let tail_opts = TailOptions {
        conditional_pairs: a.conditional_pairs.or(file.analysis.conditional_pairs).unwrap_or(TailOptions::default().conditional_pairs),
        ..Default::default()
    };
    let out_dir = a.out_dir.clone().unwrap_or_else(|| a.samples.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
    create_dir(&out_dir)?;

    let mut checks = Vec::new();
    let mut outputs = Vec::new();
    let mut summary = serde_json::Map::new();
    let cov_lags = (1, 8.min(n / 2));

    for est in &estimators {
        match est {
            Estimator::Covariance => {
                let Some(cov) = soft(gap_lag_covariance(&set), lenient, "covariance", &mut summary)? else { continue };
                let pred = predicted_gap_covariance(&p)?;
                let (lo, hi) = cov_lags;
                let z: Vec<f64> = (lo..=hi).map(|d| (cov.values[d] - pred[d]) / cov.std_errors[d]).collect();
                let hits = z.iter().filter(|z| z.abs() <= 3.0).count();
                let need = (3 * z.len()).div_ceil(4);
                checks.push(Check::holds("covariance lag 0 positive", cov.values[0] > 0.0));
                checks.push(Check::at_most("covariance lags off prediction (>3 SE)", (z.len() - hits) as f64, (z.len() - need) as f64));
                let path = out_dir.join("covariance.csv");
                cov.write_csv(create_file(&path)?)?;
                outputs.push(path);
                summary.insert(
                    "covariance".into(),
                    json!({ "values": cov.values, "std_errors": cov.std_errors, "ess": cov.ess,
                            "predicted": pred, "z_scores": z, "lags_checked": [lo, hi], "samples_used": cov.samples_used }),
                );
            }
            Estimator::VarianceScaling => {
                let Some(fit) = soft(variance_scaling(&set, &ks), lenient, "variance_scaling", &mut summary)? else { continue };
                if p.s < 1.0 {
                    checks.push(Check::within("variance slope", fit.slope, p.s, 0.15));
                    checks.push(Check::within("variance amplitude / sigma2", fit.amplitude / fit.sigma2, 1.0, 0.30));
                }
                let path = out_dir.join("variance_scaling.csv");
                fit.write_csv(create_file(&path)?)?;
                outputs.push(path);
                summary.insert("variance_scaling".into(), serde_json::to_value(&fit)?);
            }
            Estimator::Rigidity => {
                let Some(prof) = soft(rigidity_profile(&set), lenient, "rigidity", &mut summary)? else { continue };
                let target = if p.s < 1.0 { p.s / 2.0 } else { 0.5 };
                checks.push(Check::within("rigidity exponent", prof.exponent(), target, 0.08));
                let path = out_dir.join("rigidity.csv");
                prof.write_csv(create_file(&path)?)?;
                outputs.push(path);
                summary.insert("rigidity".into(), serde_json::to_value(&prof)?);
            }
            Estimator::Tail => {
                let Some(rep) = soft(repulsion_tail(&set, &eps, &tail_opts), lenient, "tail", &mut summary)? else { continue };
                let mono = (1..eps.len()).all(|k| rep.probabilities[k] <= rep.probabilities[k - 1] + 3.0 * rep.std_errors[k - 1]);
                checks.push(Check::holds("tail probabilities monotone", mono));
                let path = out_dir.join("tail.csv");
                rep.write_csv(create_file(&path)?)?;
                outputs.push(path);
                summary.insert("tail".into(), serde_json::to_value(&rep)?);
            }
            Estimator::Observables => {
                let mean = observable_estimate(&set, Observable::MeanCentralGap)?;
                let var = observable_estimate(&set, Observable::CentralGapVariance)?;
                summary.insert("observables".into(), json!({ "mean_central_gap": mean, "central_gap_variance": var }));
            }
        }
    }
    if let Some(other) = &a.compare {
        let b = load(other)?;
        let cmp = convergence_compare(&set, &b, Observable::CentralGapVariance, 0.0)?;
        checks.push(Check::at_most("convergence |difference| / 3 SE", cmp.difference.abs() / (3.0 * cmp.pooled_std_error), 1.0));
        summary.insert("convergence".into(), serde_json::to_value(cmp)?);
    }
    summary.insert("checks".into(), serde_json::to_value(&checks)?);
    summary.insert("passed".into(), json!(checks.iter().all(|c| c.passed)));
    let summary_path = out_dir.join("analysis_summary.json");
    write_json(&summary_path, &summary)?;
    outputs.push(summary_path);

    let mut m = RunManifest::new("analyze", threads);
    m.params = Some(p);
    m.sampler = Some(set.config);
    m.seeds = set.chains.iter().map(|c| c.seed).collect();
    m.analysis = Some(AnalysisWindows { ks, eps, covariance_lags: cov_lags, conditional_pairs: tail_opts.conditional_pairs });
    m.options = json!({ "samples": a.samples, "compare": a.compare, "estimators": estimators });
    m.outputs = outputs;
    m.finished_unix = Some(now());
    m.save(&out_dir.join("analysis_manifest.json"))?;

    print_checks(&checks);
    verdict(&checks)
}
