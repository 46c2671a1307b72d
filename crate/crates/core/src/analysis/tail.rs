//! Small-gap probabilities.
//!
//! Besides raw counting, each sampled point's left gap gets its exact
//! conditional probability given all other points: the point's one-dimensional
//! Gibbs density between its neighbours is integrated numerically. Averaging
//! these conditional probabilities estimates ℙ(gap < ε) far below the raw
//! counting floor.

use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{BatchAccumulator, Estimate};
use crate::error::{Error, Result};
use crate::kernel::TabulatedKernel;
use crate::sampler::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailOptions {
    /// (snapshot, point) pairs for the conditional estimate; 0 disables it.
    pub conditional_pairs: usize,
    pub seed: u64,
    /// Gauss–Legendre nodes per subinterval.
    pub nodes: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions { conditional_pairs: 20_000, seed: 0x7a11, nodes: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub eps_grid: Vec<f64>,
    /// Raw fraction of gaps below ε.
    pub probabilities: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Events counted at each ε.
    pub events: Vec<u64>,
    /// 3 / draws where no event was seen (95% one-sided bound), otherwise the estimate.
    pub upper_bounds: Vec<f64>,
    /// d log P / d log ε between consecutive grid points (raw); NaN where undefined.
    pub local_log_slopes: Vec<f64>,
    pub conditional: Vec<f64>,
    pub conditional_std_errors: Vec<f64>,
    pub conditional_log_slopes: Vec<f64>,
    pub draws: u64,
    pub min_gap: f64,
}

impl TailReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eps,probability,std_error,events,upper_bound,conditional,conditional_std_error")?;
        for i in 0..self.eps_grid.len() {
            let (c, ce) = self.conditional.get(i).map_or((f64::NAN, f64::NAN), |&c| (c, self.conditional_std_errors[i]));
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.eps_grid[i], self.probabilities[i], self.std_errors[i], self.events[i], self.upper_bounds[i], c, ce
            )?;
        }
        Ok(())
    }
}

fn log_slopes(eps: &[f64], p: &[f64]) -> Vec<f64> {
    eps.windows(2)
        .zip(p.windows(2))
        .map(|(e, q)| if q[0] > 0.0 && q[1] > 0.0 { (q[0] / q[1]).ln() / (e[0] / e[1]).ln() } else { f64::NAN })
        .collect()
}

pub fn repulsion_tail(samples: &SampleSet, eps_grid: &[f64], opts: &TailOptions) -> Result<TailReport> {
    if eps_grid.is_empty() || eps_grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::Usage("eps grid must lie in (0, 1]".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Usage("eps grid must be decreasing".into()));
    }
    let n = samples.n();
    let m = eps_grid.len();
    let mut events = vec![0u64; m];
    let mut min_gap = f64::INFINITY;
    let mut acc = BatchAccumulator::new(m);
    let mut frac = vec![0.0; m];
    for c in &samples.chains {
        acc.begin_chain(c.len())?;
        for snap in c.gaps.chunks_exact(n) {
            frac.iter_mut().for_each(|f| *f = 0.0);
            for &y in snap {
                min_gap = min_gap.min(y);
                for (k, &e) in eps_grid.iter().enumerate() {
                    if y < e {
                        events[k] += 1;
                        frac[k] += 1.0;
                    }
                }
            }
            frac.iter_mut().for_each(|f| *f /= n as f64);
            acc.push(&frac);
        }
    }
    let est = acc.finish()?;
    let draws = (samples.total_snapshots() * n) as u64;
    let probabilities: Vec<f64> = events.iter().map(|&e| e as f64 / draws as f64).collect();
    let std_errors: Vec<f64> = est.iter().map(|e| e.std_error).collect();
    let upper_bounds = events.iter().zip(&probabilities).map(|(&e, &p)| if e == 0 { 3.0 / draws as f64 } else { p }).collect();
    let local_log_slopes = log_slopes(eps_grid, &probabilities);

    let (conditional, conditional_std_errors) = if opts.conditional_pairs > 0 {
        let est = conditional_tail(samples, eps_grid, opts)?;
        (est.iter().map(|e| e.mean).collect(), est.iter().map(|e| e.std_error).collect())
    } else {
        (Vec::new(), Vec::new())
    };
    let conditional_log_slopes = log_slopes(eps_grid, &conditional);
    Ok(TailReport {
        eps_grid: eps_grid.to_vec(),
        probabilities,
        std_errors,
        events,
        upper_bounds,
        local_log_slopes,
        conditional,
        conditional_std_errors,
        conditional_log_slopes,
        draws,
        min_gap,
    })
}

/// Mean over sampled (snapshot, point) pairs of ℙ(left gap < ε | other points).
fn conditional_tail(samples: &SampleSet, eps_grid: &[f64], opts: &TailOptions) -> Result<Vec<Estimate>> {
    let params = samples.params;
    let n = params.n;
    let nf = n as f64;
    let table = TabulatedKernel::new(params.s)?;
    let quad = GaussLegendre::new(NonZeroUsize::new(opts.nodes.max(2)).unwrap());
    let coupling = params.beta * 2.0 * nf.powf(-params.s);
    let total = samples.total_snapshots();
    let pairs_per_chain = (opts.conditional_pairs / samples.chains.len()).max(super::BATCHES);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut acc = BatchAccumulator::new(eps_grid.len());
    let mut offsets = vec![0.0; n];
    let mut out = vec![0.0; eps_grid.len()];
    if total == 0 {
        return Err(Error::InsufficientData("empty sample set".into()));
    }
    for c in &samples.chains {
        let len = c.len();
        acc.begin_chain(pairs_per_chain)?;
        for j in 0..pairs_per_chain {
            // Evenly spread through the chain so batches stay contiguous in time.
            let k = (j * len) / pairs_per_chain;
            let snap = c.snapshot(k, n);
            let p = rng.random_range(0..n);
            // Offsets of the other points from point p, in gap units, in (0, N).
            let mut acc_pos = 0.0;
            for t in 0..n {
                let q = (p + t) % n;
                offsets[q] = acc_pos;
                acc_pos += snap[q];
            }
            let left = snap[(p + n - 1) % n];
            let right = snap[p];
            // Conditional energy relative to the current position.
            let energy = |t: f64| -> f64 {
                let mut e = 0.0;
                for (q, &o) in offsets.iter().enumerate() {
                    if q != p {
                        e += table.eval((t - o) / nf);
                    }
                }
                e
            };
            let e0 = energy(0.0);
            let density = |t: f64| (-coupling * (energy(t) - e0)).exp();
            // Breakpoints a, a+ε_k..., then the rest of (a, b) in four pieces.
            let a = -left;
            let b = right;
            let mut cuts: Vec<f64> = vec![a];
            for &e in eps_grid.iter().rev() {
                if a + e < b {
                    cuts.push(a + e);
                }
            }
            let last = *cuts.last().unwrap();
            for q in 1..=4 {
                cuts.push(last + (b - last) * q as f64 / 4.0);
            }
            let pieces: Vec<f64> = cuts.windows(2).map(|w| quad.integrate(w[0], w[1], density)).collect();
            let z: f64 = pieces.iter().sum();
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::Numerical(format!("conditional density normalisation {z} at snapshot {k}, point {p}")));
            }
            let mut cum = vec![0.0; pieces.len() + 1];
            for (i, v) in pieces.iter().enumerate() {
                cum[i + 1] = cum[i] + v;
            }
            // cuts[1 + r] corresponds to the r-th smallest ε that fits.
            for (idx, &e) in eps_grid.iter().enumerate() {
                let r = eps_grid.len() - 1 - idx;
                out[idx] = if a + e < b { cum[1 + r] / z } else { 1.0 };
            }
            acc.push(&out);
        }
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::Params;
    use crate::sampler::{run, SamplerConfig};

    #[test]
    fn raw_tail_properties() {
        let p = Params::new(16, 0.5, 2.0).unwrap();
        let c = SamplerConfig { sweeps: 3000, burn_in: 500, thin: 5, ..Default::default() };
        let s = run(&p, &c).unwrap();
        let grid = [1.0, 0.5, 0.2, 0.1];
        let rep = repulsion_tail(&s, &grid, &TailOptions { conditional_pairs: 640, ..Default::default() }).unwrap();
        assert!(rep.probabilities[0] < 1.0 && rep.probabilities[0] > 0.0);
        for w in rep.probabilities.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for w in rep.conditional.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // Both estimators target the same probability.
        let (raw, cond) = (rep.probabilities[1], rep.conditional[1]);
        let se = (rep.std_errors[1].powi(2) + rep.conditional_std_errors[1].powi(2)).sqrt();
        assert!((raw - cond).abs() < 4.0 * se + 0.01, "{raw} {cond} {se}");
        assert_eq!(rep.local_log_slopes.len(), 3);
    }

    #[test]
    fn grid_validation() {
        let p = Params::new(8, 0.5, 2.0).unwrap();
        let s = run(&p, &SamplerConfig { sweeps: 200, burn_in: 10, thin: 1, ..Default::default() }).unwrap();
        let o = TailOptions::default();
        assert!(repulsion_tail(&s, &[0.1, 0.2], &o).is_err());
        assert!(repulsion_tail(&s, &[0.0], &o).is_err());
    }

    #[test]
    fn rule_of_three_when_empty() {
        let p = Params::new(8, 0.5, 2.0).unwrap();
        let s = run(&p, &SamplerConfig { sweeps: 200, burn_in: 10, thin: 1, ..Default::default() }).unwrap();
        let rep = repulsion_tail(&s, &[1e-6], &TailOptions { conditional_pairs: 0, ..Default::default() }).unwrap();
        assert_eq!(rep.events[0], 0);
        assert!((rep.upper_bounds[0] - 3.0 / rep.draws as f64).abs() < 1e-18);
        assert!(rep.conditional.is_empty());
    }
}
