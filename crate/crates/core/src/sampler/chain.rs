//! Single-chain Metropolis dynamics in gap coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circle::{kahan_sum, Params};
use crate::error::{Error, Result};
use crate::kernel::{riesz_kernel, TabulatedKernel};

/// Proposal family. Both transfer δ between two gaps, preserving the gap sum exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MoveKind {
    /// Adjacent gaps: one point moves by δ/N. O(N) per proposal.
    #[default]
    Neighbour,
    /// Uniform ordered pair (i, j): the points between gap i and gap j shift rigidly. O(N²).
    AnyPair,
}

/// Positions in gap units: P_0 < P_1 < ... < P_{N-1} < P_0 + N, gap k = P_{k+1} - P_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    #[serde(with = "crate::bits::vec")]
    positions: Vec<f64>,
    #[serde(with = "crate::bits::scalar")]
    pub energy: f64,
    pub rng: ChaCha8Rng,
    #[serde(with = "crate::bits::scalar")]
    pub step: f64,
    pub accepted: u64,
    pub proposed: u64,
    /// Sweeps completed.
    pub sweep: u64,
    #[serde(skip)]
    cache: Vec<f64>,
}

impl ChainState {
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn gaps(&self) -> Vec<f64> {
        let n = self.n();
        let p = &self.positions;
        (0..n)
            .map(|k| if k + 1 < n { p[k + 1] - p[k] } else { p[0] + n as f64 - p[k] })
            .collect()
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Chain seed for chain k: base XOR splitmix64(k).
pub fn chain_seed(base: u64, k: u64) -> u64 {
    let mut z = k.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    base ^ (z ^ (z >> 31))
}

/// Exact energy from gap-unit positions, with the absolute scale Σ|terms| used
/// for drift checks (the energy itself can be close to zero when s < 1).
pub fn exact_energy(positions: &[f64], params: &Params) -> Result<(f64, f64)> {
    let n = positions.len();
    let nf = n as f64;
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let d = (positions[b] - positions[a]) / nf;
            let u = d - d.floor();
            if u <= 0.0 || u >= 1.0 {
                return Err(Error::Degenerate(format!("points {a} and {b} coincide")));
            }
            terms.push(riesz_kernel(params.s, u)?);
        }
    }
    let scale = 2.0 * nf.powf(-params.s);
    let abs = kahan_sum(terms.iter().map(|t| t.abs()));
    Ok((scale * kahan_sum(terms), scale * abs))
}

/// Shared, read-only data for advancing chains with fixed parameters.
#[derive(Debug, Clone)]
pub struct Sampler {
    params: Params,
    table: TabulatedKernel,
    moves: MoveKind,
    prefactor: f64,
}

/// Outcome of one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    pub accepted: u64,
    pub proposed: u64,
}

impl Sampler {
    pub fn new(params: Params, moves: MoveKind) -> Result<Self> {
        params.validate()?;
        Ok(Sampler {
            table: TabulatedKernel::new(params.s)?,
            prefactor: 2.0 * (params.n as f64).powf(-params.s),
            params,
            moves,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn moves(&self) -> MoveKind {
        self.moves
    }

    /// Uniform gaps, exact energy, zero counters.
    pub fn init_chain(&self, seed: u64, step: f64) -> Result<ChainState> {
        let positions: Vec<f64> = (0..self.params.n).map(|k| k as f64).collect();
        let (energy, _) = exact_energy(&positions, &self.params)?;
        let mut st = ChainState {
            positions,
            energy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step,
            accepted: 0,
            proposed: 0,
            sweep: 0,
            cache: Vec::new(),
        };
        self.rebuild_cache(&mut st);
        Ok(st)
    }

    /// Restores the pair cache after deserialization.
    pub fn attach(&self, st: &mut ChainState) -> Result<()> {
        if st.positions.len() != self.params.n {
            return Err(Error::Config(format!("checkpoint has {} points, expected {}", st.positions.len(), self.params.n)));
        }
        self.rebuild_cache(st);
        Ok(())
    }

    #[inline]
    fn pair(&self, p: &[f64], a: usize, b: usize) -> f64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.table.eval_unit((p[hi] - p[lo]) * (1.0 / self.params.n as f64))
    }

    /// The cache entry for (a, b) is always the canonical function of the
    /// current positions, so rebuilding reproduces it bit for bit.
    fn rebuild_cache(&self, st: &mut ChainState) {
        let n = self.params.n;
        let ld = stride(n);
        let mut cache = vec![0.0; n * stride(n)];
        for a in 0..n {
            for b in a + 1..n {
                let v = self.pair(&st.positions, a, b);
                cache[a * ld + b] = v;
                cache[b * ld + a] = v;
            }
        }
        st.cache = cache;
    }

    /// N proposals.
    pub fn sweep(&self, st: &mut ChainState, scratch: &mut Vec<f64>) -> SweepStats {
        let n = self.params.n;
        let mut acc = 0;
        for _ in 0..n {
            let ok = match self.moves {
                MoveKind::Neighbour => self.neighbour_move(st, scratch),
                MoveKind::AnyPair => self.pair_move(st, scratch),
            };
            acc += ok as u64;
        }
        st.accepted += acc;
        st.proposed += n as u64;
        st.sweep += 1;
        SweepStats { accepted: acc, proposed: n as u64 }
    }

    fn accept(&self, st: &mut ChainState, de: f64) -> bool {
        let u: f64 = st.rng.random();
        de <= 0.0 || u < (-self.params.beta * de).exp()
    }

    fn neighbour_move(&self, st: &mut ChainState, scratch: &mut Vec<f64>) -> bool {
        let n = self.params.n;
        let ld = stride(n);
        let nf = n as f64;
        let p = st.rng.random_range(0..n);
        let delta = st.step * (2.0 * st.rng.random::<f64>() - 1.0);
        let pos = &st.positions;
        let before = if p == 0 { pos[0] + nf - pos[n - 1] } else { pos[p] - pos[p - 1] };
        let after = if p + 1 == n { pos[0] + nf - pos[p] } else { pos[p + 1] - pos[p] };
        if !(before + delta > 0.0 && after - delta > 0.0) {
            // Keep the RNG stream independent of the outcome.
            let _: f64 = st.rng.random();
            return false;
        }
        let moved = pos[p] + delta;
        let inv_n = 1.0 / nf;
        scratch.resize(n, 0.0);
        let row = &st.cache[p * ld..p * ld + n];
        // Positions span less than N, so every difference below lies in (0, N).
        let mut sum = 0.0;
        for q in 0..p {
            let v = self.table.eval_unit((moved - pos[q]) * inv_n);
            sum += v - row[q];
            scratch[q] = v;
        }
        for q in p + 1..n {
            let v = self.table.eval_unit((pos[q] - moved) * inv_n);
            sum += v - row[q];
            scratch[q] = v;
        }
        let de = self.prefactor * sum;
        if !self.accept(st, de) {
            return false;
        }
        st.positions[p] = moved;
        scratch[p] = 0.0;
        st.cache[p * ld..p * ld + n].copy_from_slice(&scratch[..n]);
        for (q, &v) in scratch.iter().enumerate() {
            st.cache[q * ld + p] = v;
        }
        st.energy += de;
        true
    }

    fn pair_move(&self, st: &mut ChainState, scratch: &mut Vec<f64>) -> bool {
        let n = self.params.n;
        let ld = stride(n);
        let i = st.rng.random_range(0..n);
        let mut j = st.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let delta = st.step * (2.0 * st.rng.random::<f64>() - 1.0);
        let gaps_i = gap(&st.positions, i);
        let gaps_j = gap(&st.positions, j);
        if !(gaps_i + delta > 0.0 && gaps_j - delta > 0.0) {
            let _: f64 = st.rng.random();
            return false;
        }
        let block_len = (j + n - i) % n;
        let (start, len, shift) = if block_len <= n - block_len {
            ((i + 1) % n, block_len, delta)
        } else {
            ((j + 1) % n, n - block_len, -delta)
        };
        let mut new_pos = st.positions.clone();
        let mut in_block = vec![false; n];
        for t in 0..len {
            let a = (start + t) % n;
            in_block[a] = true;
            new_pos[a] += shift;
        }
        scratch.clear();
        let mut sum = 0.0;
        for a in (0..n).filter(|&a| in_block[a]) {
            for b in (0..n).filter(|&b| !in_block[b]) {
                let v = self.pair(&new_pos, a, b);
                sum += v - st.cache[a * ld + b];
                scratch.push(v);
            }
        }
        let de = self.prefactor * sum;
        if !self.accept(st, de) {
            return false;
        }
        st.positions = new_pos;
        let mut k = 0;
        for a in (0..n).filter(|&a| in_block[a]) {
            for b in (0..n).filter(|&b| !in_block[b]) {
                st.cache[a * ld + b] = scratch[k];
                st.cache[b * ld + a] = scratch[k];
                k += 1;
            }
        }
        st.energy += de;
        true
    }

    /// Compares the cached energy with the exact one (error beyond `rtol` of the
    /// absolute energy scale), recentres positions and rebuilds the cache.
    pub fn revalidate(&self, st: &mut ChainState, rtol: f64) -> Result<f64> {
        let (exact, scale) = exact_energy(&st.positions, &self.params)?;
        let drift = (st.energy - exact).abs() / scale.max(f64::MIN_POSITIVE);
        if drift > rtol {
            return Err(Error::Numerical(format!(
                "cached energy {} drifted from exact {} (relative {drift:e}) at sweep {}",
                st.energy, exact, st.sweep
            )));
        }
        st.energy = exact;
        let nf = self.params.n as f64;
        let shift = (st.positions[0] / nf).floor() * nf;
        if shift != 0.0 {
            st.positions.iter_mut().for_each(|x| *x -= shift);
        }
        self.rebuild_cache(st);
        Ok(drift)
    }
}

/// Row stride of the pair cache; padded so column updates do not alias in the CPU cache.
fn stride(n: usize) -> usize {
    if n >= 64 {
        n + 8
    } else {
        n
    }
}

fn gap(p: &[f64], k: usize) -> f64 {
    let n = p.len();
    if k + 1 < n {
        p[k + 1] - p[k]
    } else {
        p[0] + n as f64 - p[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::{config_of, GapVector};
    use crate::energy::total_energy;

    #[test]
    fn init_is_uniform_and_deterministic() {
        let params = Params::new(8, 0.5, 1.0).unwrap();
        let s = Sampler::new(params, MoveKind::Neighbour).unwrap();
        let a = s.init_chain(42, 0.5).unwrap();
        let b = s.init_chain(42, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(a.gaps().iter().all(|&g| g == 1.0));
        let e = total_energy(&config_of(&GapVector::uniform(8), 0.0).unwrap(), &params).unwrap();
        assert!((a.energy - e).abs() < 1e-12 * e.abs().max(1.0));
    }

    #[test]
    fn cached_energy_tracks_exact() {
        for moves in [MoveKind::Neighbour, MoveKind::AnyPair] {
            for &s_exp in &[0.5, 1.5] {
                let params = Params::new(24, s_exp, 2.0).unwrap();
                let s = Sampler::new(params, moves).unwrap();
                let mut st = s.init_chain(7, 0.8).unwrap();
                let mut scratch = Vec::new();
                for _ in 0..200 {
                    s.sweep(&mut st, &mut scratch);
                }
                assert!(st.accepted > 0);
                let drift = s.revalidate(&mut st, 1e-6).unwrap();
                assert!(drift < 1e-9, "{moves:?} s={s_exp}: {drift:e}");
                let sum: f64 = st.gaps().iter().sum();
                assert!((sum - 24.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cache_rebuild_is_bitwise() {
        let params = Params::new(16, 0.5, 1.0).unwrap();
        let s = Sampler::new(params, MoveKind::Neighbour).unwrap();
        let mut st = s.init_chain(3, 1.0).unwrap();
        let mut scratch = Vec::new();
        for _ in 0..50 {
            s.sweep(&mut st, &mut scratch);
        }
        let mut copy = st.clone();
        s.attach(&mut copy).unwrap();
        assert_eq!(st.cache, copy.cache);
    }

    #[test]
    fn energy_drift_aborts() {
        let params = Params::new(8, 0.5, 1.0).unwrap();
        let s = Sampler::new(params, MoveKind::Neighbour).unwrap();
        let mut st = s.init_chain(3, 1.0).unwrap();
        st.energy += 1.0;
        assert!(matches!(s.revalidate(&mut st, 1e-6), Err(Error::Numerical(_))));
    }

    #[test]
    fn seeds_differ_per_chain() {
        let a: Vec<u64> = (0..8).map(|k| chain_seed(1, k)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 8);
    }
}
