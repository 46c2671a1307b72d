//! Batch-means error estimation for MCMC output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// Sample variance over the standard error squared.
    pub ess: f64,
    pub samples: usize,
}

/// Accumulates several statistics per snapshot, split into `BATCHES`
/// contiguous batches per chain. Chains are combined as independent estimates.
#[derive(Debug, Clone)]
pub struct BatchAccumulator {
    width: usize,
    chains: Vec<ChainBatches>,
}

#[derive(Debug, Clone)]
struct ChainBatches {
    per_batch: usize,
    seen: usize,
    sums: Vec<Vec<f64>>,
    // Σx and Σx² over all used samples, per statistic
    total: Vec<f64>,
    total_sq: Vec<f64>,
}

impl BatchAccumulator {
    pub fn new(width: usize) -> Self {
        BatchAccumulator { width, chains: Vec::new() }
    }

    /// Starts a chain with `len` snapshots; trailing snapshots that do not fill a batch are dropped.
    pub fn begin_chain(&mut self, len: usize) -> Result<()> {
        if len < BATCHES {
            return Err(Error::InsufficientData(format!("{len} snapshots in a chain, need at least {BATCHES}")));
        }
        self.chains.push(ChainBatches {
            per_batch: len / BATCHES,
            seen: 0,
            sums: vec![vec![0.0; self.width]; BATCHES],
            total: vec![0.0; self.width],
            total_sq: vec![0.0; self.width],
        });
        Ok(())
    }

    pub fn push(&mut self, stats: &[f64]) {
        let c = self.chains.last_mut().expect("begin_chain first");
        let b = c.seen / c.per_batch;
        c.seen += 1;
        if b >= BATCHES {
            return;
        }
        for (k, &x) in stats.iter().enumerate() {
            c.sums[b][k] += x;
            c.total[k] += x;
            c.total_sq[k] += x * x;
        }
    }

    pub fn finish(&self) -> Result<Vec<Estimate>> {
        if self.chains.is_empty() {
            return Err(Error::InsufficientData("no chains".into()));
        }
        let nc = self.chains.len() as f64;
        let used: usize = self.chains.iter().map(|c| c.per_batch * BATCHES).sum();
        Ok((0..self.width)
            .map(|k| {
                let mut mean = 0.0;
                let mut var_of_mean = 0.0;
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for c in &self.chains {
                    let means: Vec<f64> = c.sums.iter().map(|s| s[k] / c.per_batch as f64).collect();
                    let m = means.iter().sum::<f64>() / BATCHES as f64;
                    let v = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
                    mean += m;
                    var_of_mean += v / BATCHES as f64;
                    s1 += c.total[k];
                    s2 += c.total_sq[k];
                }
                mean /= nc;
                let std_error = var_of_mean.sqrt() / nc;
                let nu = used as f64;
                let sample_var = ((s2 - s1 * s1 / nu) / (nu - 1.0)).max(0.0);
                let ess = if std_error > 0.0 { sample_var / (std_error * std_error) } else { nu };
                Estimate { mean, std_error, ess, samples: used }
            })
            .collect())
    }
}

/// Batch-means estimate of the mean of one series.
pub fn batch_means(series: &[f64]) -> Result<Estimate> {
    let mut acc = BatchAccumulator::new(1);
    acc.begin_chain(series.len())?;
    for &x in series {
        acc.push(&[x]);
    }
    Ok(acc.finish()?[0])
}

/// Split-chain potential scale reduction of a scalar statistic: each chain is
/// halved and the halves compared.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let mut halves: Vec<&[f64]> = Vec::new();
    for c in chains {
        let h = c.len() / 2;
        if h < 2 {
            return Err(Error::InsufficientData("chains too short for split R-hat".into()));
        }
        halves.push(&c[..h]);
        halves.push(&c[h..2 * h]);
    }
    let len = halves.iter().map(|h| h.len()).min().unwrap_or(0) as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / h.len() as f64).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = len / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (h.len() as f64 - 1.0))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return Ok(1.0);
    }
    let var_plus = (len - 1.0) / len * w + b / len;
    Ok((var_plus / w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn iid_error_matches_theory() {
        let xs = ar1(64_000, 0.0, 1);
        let e = batch_means(&xs).unwrap();
        let theory = (1.0 / 64_000f64).sqrt();
        assert!((e.std_error / theory - 1.0).abs() < 0.5, "{}", e.std_error / theory);
        assert!(e.ess > 20_000.0);
    }

    #[test]
    fn ar1_errors_scale_as_inverse_root() {
        // Long-run variance of AR(1) with unit innovations: 1/(1-φ)².
        let phi: f64 = 0.9;
        let mut prev: Option<f64> = None;
        for (k, &n) in [40_000usize, 160_000, 640_000].iter().enumerate() {
            // Average several replicas to tame the noise of a single 32-batch estimate.
            let se: f64 = (0..8).map(|r| batch_means(&ar1(n, phi, 10 * k as u64 + r)).unwrap().std_error).sum::<f64>() / 8.0;
            let theory = (1.0 / (1.0 - phi).powi(2) / n as f64).sqrt();
            assert!((se / theory - 1.0).abs() < 0.3, "n={n}: {} vs {theory}", se);
            if let Some(p) = prev {
                let ratio = p / se;
                assert!(ratio > 1.0 && ratio < 4.0, "{ratio}");
            }
            prev = Some(se);
        }
    }

    #[test]
    fn chains_combine() {
        let mut acc = BatchAccumulator::new(2);
        for seed in 0..4 {
            let xs = ar1(3200, 0.5, seed);
            acc.begin_chain(xs.len()).unwrap();
            for &x in &xs {
                acc.push(&[x, 2.0 + x]);
            }
        }
        let est = acc.finish().unwrap();
        assert!((est[1].mean - est[0].mean - 2.0).abs() < 1e-12);
        assert!((est[1].std_error - est[0].std_error).abs() < 1e-12);
        assert_eq!(est[0].samples, 4 * 3200);
    }

    #[test]
    fn too_short() {
        assert!(matches!(batch_means(&[1.0; 10]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn rhat_detects_shift() {
        let a = ar1(4000, 0.3, 1);
        let b: Vec<f64> = ar1(4000, 0.3, 2).into_iter().map(|x| x + 3.0).collect();
        assert!(split_rhat(&[a.clone(), b]).unwrap() > 1.5);
        let c = ar1(4000, 0.3, 3);
        assert!(split_rhat(&[a, c]).unwrap() < 1.05);
    }
}
