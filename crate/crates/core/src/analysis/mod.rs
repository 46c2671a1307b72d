//! Estimators over sample sets: gap lag covariance, block-sum variance
//! scaling, repulsion tails, rigidity profiles and N-to-N' comparisons.

mod batch;
mod tail;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_power_law, DecayFit};
use crate::sampler::SampleSet;

pub use batch::{batch_means, split_rhat, BatchAccumulator, Estimate, BATCHES};
pub use tail::{repulsion_tail, TailOptions, TailReport};

/// Minimum kept snapshots for covariance estimates.
pub const MIN_SNAPSHOTS: usize = 100;

fn accumulate<F>(samples: &SampleSet, width: usize, mut stat: F) -> Result<Vec<Estimate>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = samples.n();
    let mut acc = BatchAccumulator::new(width);
    let mut buf = vec![0.0; width];
    for c in &samples.chains {
        acc.begin_chain(c.len())?;
        for snap in c.gaps.chunks_exact(n) {
            stat(snap, &mut buf);
            acc.push(&buf);
        }
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCovariance {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples_used: usize,
    /// Effective sample size of the lag-0 estimate.
    pub ess: f64,
}

impl LagCovariance {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lag,covariance,std_error")?;
        for k in 0..self.lags.len() {
            writeln!(w, "{},{},{}", self.lags[k], self.values[k], self.std_errors[k])?;
        }
        Ok(())
    }
}

/// Gap deviations y − 1 in fixed point with quantum 2^-40. Sums and products
/// of these are exact, so estimators do not depend on the index origin.
const QUANTUM_BITS: i32 = 40;

fn quantize(snap: &[f64], out: &mut [i64]) {
    let scale = 2f64.powi(QUANTUM_BITS);
    for (o, y) in out.iter_mut().zip(snap) {
        *o = ((y - 1.0) * scale).round() as i64;
    }
}

fn dequantize_sq(v: i128, count: usize) -> f64 {
    v as f64 * 2f64.powi(-2 * QUANTUM_BITS) / count as f64
}

/// Cov(gap_i, gap_{i+d}) averaged over i and over snapshots; the mean gap is exactly 1.
pub fn gap_lag_covariance(samples: &SampleSet) -> Result<LagCovariance> {
    let n = samples.n();
    let total = samples.total_snapshots();
    if total < MIN_SNAPSHOTS {
        return Err(Error::InsufficientData(format!("{total} snapshots, need at least {MIN_SNAPSHOTS}")));
    }
    let width = n / 2 + 1;
    let mut q = vec![0i64; n];
    let est = accumulate(samples, width, |snap, out| {
        quantize(snap, &mut q);
        for (d, o) in out.iter_mut().enumerate() {
            let mut acc: i128 = 0;
            for i in 0..n {
                acc += q[i] as i128 * q[(i + d) % n] as i128;
            }
            *o = dequantize_sq(acc, n);
        }
    })?;
    Ok(LagCovariance {
        lags: (0..width).collect(),
        values: est.iter().map(|e| e.mean).collect(),
        std_errors: est.iter().map(|e| e.std_error).collect(),
        samples_used: est[0].samples,
        ess: est[0].ess,
    })
}

/// σ² = cot(πs/2) / (β (π/2) s).
pub fn hyperuniform_sigma2(s: f64, beta: f64) -> f64 {
    let h = std::f64::consts::FRAC_PI_2 * s;
    (h.cos() / h.sin()) / (beta * h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub ks: Vec<usize>,
    pub variances: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub slope: f64,
    pub amplitude: f64,
    pub fit: DecayFit,
    /// Reference σ² for the amplitude.
    pub sigma2: f64,
}

impl ScalingFit {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,variance,std_error")?;
        for i in 0..self.ks.len() {
            writeln!(w, "{},{},{}", self.ks[i], self.variances[i], self.std_errors[i])?;
        }
        Ok(())
    }
}

fn check_ks(ks: &[usize], n: usize) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::Usage("no block sizes given".into()));
    }
    for w in ks.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Usage("block sizes must be strictly increasing".into()));
        }
    }
    if ks[0] == 0 || *ks.last().unwrap() > n / 2 {
        return Err(Error::Usage(format!("block sizes must lie in 1..={}", n / 2)));
    }
    Ok(())
}

/// Per-snapshot mean over starting points i of (Σ_{j=i}^{i+K-1} (y_j - 1))², for each K.
fn block_variances(samples: &SampleSet, ks: &[usize]) -> Result<Vec<Estimate>> {
    let n = samples.n();
    check_ks(ks, n)?;
    let mut q = vec![0i64; n];
    let mut prefix = vec![0i64; 2 * n + 1];
    accumulate(samples, ks.len(), |snap, out| {
        quantize(snap, &mut q);
        for j in 0..2 * n {
            prefix[j + 1] = prefix[j] + q[j % n];
        }
        for (o, &k) in out.iter_mut().zip(ks) {
            let mut acc: i128 = 0;
            for i in 0..n {
                let b = (prefix[i + k] - prefix[i]) as i128;
                acc += b * b;
            }
            *o = dequantize_sq(acc, n);
        }
    })
}

/// Var(Σ of K consecutive gaps − K) over the given K, with a weighted power-law fit over all of them.
pub fn variance_scaling(samples: &SampleSet, ks: &[usize]) -> Result<ScalingFit> {
    let est = block_variances(samples, ks)?;
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let variances: Vec<f64> = est.iter().map(|e| e.mean).collect();
    let std_errors: Vec<f64> = est.iter().map(|e| e.std_error).collect();
    let window = (ks[0], *ks.last().unwrap());
    let fit = fit_power_law(&xs, &variances, Some(&std_errors), window)?;
    Ok(ScalingFit {
        ks: ks.to_vec(),
        variances,
        std_errors,
        slope: fit.exponent,
        amplitude: fit.amplitude,
        fit,
        sigma2: hyperuniform_sigma2(samples.params.s, samples.params.beta),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityProfile {
    pub ks: Vec<usize>,
    /// Standard deviation of the K-block sum.
    pub std_devs: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Growth of the standard deviation over K ∈ [4, N/8].
    pub fit: DecayFit,
}

impl RigidityProfile {
    pub fn exponent(&self) -> f64 {
        self.fit.exponent
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,std_dev,std_error")?;
        for i in 0..self.ks.len() {
            writeln!(w, "{},{},{}", self.ks[i], self.std_devs[i], self.std_errors[i])?;
        }
        Ok(())
    }
}

/// Dyadic K = 1, 2, 4, ..., ≤ N/2 (plus N/2 itself).
pub fn dyadic_blocks(n: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = 1;
    while k <= n / 2 {
        ks.push(k);
        k *= 2;
    }
    if ks.last() != Some(&(n / 2)) && n >= 2 {
        ks.push(n / 2);
    }
    ks
}

pub fn rigidity_profile(samples: &SampleSet) -> Result<RigidityProfile> {
    let n = samples.n();
    let total = samples.total_snapshots();
    if total < 1000 {
        return Err(Error::InsufficientData(format!("{total} snapshots, need at least 1000")));
    }
    let ks = dyadic_blocks(n);
    let est = block_variances(samples, &ks)?;
    let std_devs: Vec<f64> = est.iter().map(|e| e.mean.max(0.0).sqrt()).collect();
    // delta method: se(√V) = se(V) / (2√V)
    let std_errors: Vec<f64> = est.iter().zip(&std_devs).map(|(e, sd)| if *sd > 0.0 { e.std_error / (2.0 * sd) } else { 0.0 }).collect();
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let fit = fit_power_law(&xs, &std_devs, Some(&std_errors), (4, (n / 8).max(5)))?;
    Ok(RigidityProfile { ks, std_devs, std_errors, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    /// Mean gap over the central window.
    MeanCentralGap,
    /// Mean of (gap − 1)² over the central window.
    CentralGapVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n_a: usize,
    pub n_b: usize,
    pub a: Estimate,
    pub b: Estimate,
    /// b − a.
    pub difference: f64,
    pub pooled_std_error: f64,
    /// |difference| > 3 pooled errors + c N_a^{-s/2}.
    pub flagged: bool,
}

/// Window of ⌊N/4⌋ gaps centred at N/2.
pub fn central_window(n: usize) -> std::ops::Range<usize> {
    let w = (n / 4).max(1);
    let start = (n - w) / 2;
    start..start + w
}

pub fn observable_estimate(samples: &SampleSet, obs: Observable) -> Result<Estimate> {
    let win = central_window(samples.n());
    let len = win.len() as f64;
    let est = accumulate(samples, 1, |snap, out| {
        let w = &snap[win.clone()];
        out[0] = match obs {
            Observable::MeanCentralGap => w.iter().sum::<f64>() / len,
            Observable::CentralGapVariance => w.iter().map(|y| (y - 1.0).powi(2)).sum::<f64>() / len,
        };
    })?;
    Ok(est[0])
}

pub fn convergence_compare(run_a: &SampleSet, run_b: &SampleSet, obs: Observable, c: f64) -> Result<Comparison> {
    let (pa, pb) = (run_a.params, run_b.params);
    if pa.s != pb.s || pa.beta != pb.beta {
        return Err(Error::Usage(format!("runs differ in (s, beta): ({}, {}) vs ({}, {})", pa.s, pa.beta, pb.s, pb.beta)));
    }
    let a = observable_estimate(run_a, obs)?;
    let b = observable_estimate(run_b, obs)?;
    let difference = b.mean - a.mean;
    let pooled_std_error = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let allowance = 3.0 * pooled_std_error + c * (pa.n as f64).powf(-pa.s / 2.0);
    Ok(Comparison { n_a: pa.n, n_b: pb.n, a, b, difference, pooled_std_error, flagged: difference.abs() > allowance })
}

/// Split-chain R-hat of the ⌊N/4⌋-gap block sum starting at gap 0.
pub fn block_sum_rhat(samples: &SampleSet) -> Result<f64> {
    let n = samples.n();
    let k = (n / 4).max(1);
    let series: Vec<Vec<f64>> = samples.chains.iter().map(|c| c.gaps.chunks_exact(n).map(|s| s[..k].iter().sum()).collect()).collect();
    split_rhat(&series)
}
