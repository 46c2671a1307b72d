//! Hamiltonian H_N = N^{-s} Σ_{i≠j} g_s(x_i - x_j) in point and gap coordinates.
//!
//! In gap coordinates every unordered pair is written through the shorter
//! arc of k ≤ ⌊N/2⌋ consecutive gaps with sum S, contributing w_k g_s(S/N)
//! where w_k = 2, except w_{N/2} = 1 for even N (both arcs of an antipodal
//! pair appear). Gradients and Hessians are taken of that form.

use serde::{Deserialize, Serialize};

use crate::circle::{kahan_sum, prefix_positions, Configuration, GapVector, Params};
use crate::error::{Error, Result};
use crate::fit::{fit_power_law, DecayFit};
use crate::kernel::{riesz_kernel, riesz_kernel_deriv};
use crate::spectral::CirculantOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// Ordered pairs i ≠ j.
    pub pair_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveDelta {
    Delta(f64),
    /// The move would make a gap nonpositive.
    Rejected,
}

impl MoveDelta {
    pub fn value(self) -> Option<f64> {
        match self {
            MoveDelta::Delta(d) => Some(d),
            MoveDelta::Rejected => None,
        }
    }
}

/// g_s at a point difference, reduced to (0, 1).
fn g_diff(s: f64, diff: f64) -> Result<f64> {
    let u = diff - diff.floor();
    if u <= 0.0 || u >= 1.0 {
        return Err(Error::Degenerate(format!("coincident points (difference {diff})")));
    }
    riesz_kernel(s, u)
}

fn arc_weight(k: usize, n: usize) -> f64 {
    if 2 * k == n {
        1.0
    } else {
        2.0
    }
}

pub fn total_energy(config: &Configuration, params: &Params) -> Result<f64> {
    Ok(energy_breakdown(config, params)?.total)
}

pub fn energy_breakdown(config: &Configuration, params: &Params) -> Result<EnergyBreakdown> {
    let x = config.points();
    let n = x.len();
    if n != params.n {
        return Err(Error::Usage(format!("configuration has {n} points, params say {}", params.n)));
    }
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            terms.push(g_diff(params.s, x[j] - x[i])?);
        }
    }
    let total = 2.0 * (n as f64).powf(-params.s) * kahan_sum(terms);
    Ok(EnergyBreakdown { total, pair_count: n * (n - 1) })
}

/// Energy as a function of the gaps (positions are prefix sums / N).
pub fn gap_energy(gaps: &GapVector, params: &Params) -> Result<f64> {
    let n = gaps.len();
    let p = prefix_positions(gaps.as_slice());
    let nf = n as f64;
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            terms.push(g_diff(params.s, (p[j] - p[i]) / nf)?);
        }
    }
    Ok(2.0 * nf.powf(-params.s) * kahan_sum(terms))
}

/// H(Y') - H(Y) where Y' moves `delta` from gap j to gap i.
///
/// Points i+1, ..., j (cyclically) shift by delta/N; only pairs across the
/// block boundary change. The smaller side is shifted, so adjacent gaps cost O(N).
pub fn pair_move_delta(gaps: &GapVector, i: usize, j: usize, delta: f64, params: &Params) -> Result<MoveDelta> {
    let y = gaps.as_slice();
    let n = y.len();
    if i >= n || j >= n || i == j {
        return Err(Error::Usage(format!("invalid gap pair ({i}, {j}) for n = {n}")));
    }
    if !(y[i] + delta > 0.0) || !(y[j] - delta > 0.0) {
        return Ok(MoveDelta::Rejected);
    }
    if delta == 0.0 {
        return Ok(MoveDelta::Delta(0.0));
    }
    let nf = n as f64;
    let p = prefix_positions(y);
    let block_len = (j + n - i) % n;
    let (start, len, shift) = if block_len <= n - block_len {
        ((i + 1) % n, block_len, delta)
    } else {
        ((j + 1) % n, n - block_len, -delta)
    };
    let mut in_block = vec![false; n];
    for t in 0..len {
        in_block[(start + t) % n] = true;
    }
    let mut terms = Vec::with_capacity(len * (n - len));
    for a in (0..n).filter(|&a| in_block[a]) {
        for b in (0..n).filter(|&b| !in_block[b]) {
            let old = (p[a] - p[b]) / nf;
            let new = (p[a] + shift - p[b]) / nf;
            terms.push(g_diff(params.s, new)? - g_diff(params.s, old)?);
        }
    }
    Ok(MoveDelta::Delta(2.0 * nf.powf(-params.s) * kahan_sum(terms)))
}

/// Circular difference-array accumulation of `value` over gaps t, ..., t+k-1.
fn add_arc(acc: &mut [f64], t: usize, k: usize, value: f64) {
    let n = acc.len() - 1;
    let end = t + k;
    if end <= n {
        acc[t] += value;
        acc[end] -= value;
    } else {
        acc[t] += value;
        acc[n] -= value;
        acc[0] += value;
        acc[end - n] -= value;
    }
}

fn resolve(acc: &[f64]) -> Vec<f64> {
    let n = acc.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut run = 0.0;
    for &a in &acc[..n] {
        run += a;
        out.push(run);
    }
    out
}

fn arc_sum(p: &[f64], t: usize, k: usize) -> f64 {
    let n = p.len() - 1;
    if t + k <= n {
        p[t + k] - p[t]
    } else {
        (p[n] - p[t]) + p[t + k - n]
    }
}

fn check_gaps(gaps: &GapVector, params: &Params) -> Result<()> {
    if gaps.len() != params.n {
        return Err(Error::Usage(format!("gap vector has {} entries, params say {}", gaps.len(), params.n)));
    }
    Ok(())
}

/// ∂H^g/∂y_m for all m.
pub fn gap_gradient(gaps: &GapVector, params: &Params) -> Result<Vec<f64>> {
    check_gaps(gaps, params)?;
    let n = gaps.len();
    let nf = n as f64;
    let p = prefix_positions(gaps.as_slice());
    let mut acc = vec![0.0; n + 1];
    for k in 1..=n / 2 {
        let w = arc_weight(k, n);
        for t in 0..n {
            let sv = arc_sum(&p, t, k) / nf;
            let d1 = riesz_kernel_deriv(params.s, sv, 1).map_err(|_| Error::Degenerate(format!("arc sum {sv}")))?;
            add_arc(&mut acc, t, k, w * d1);
        }
    }
    let scale = nf.powf(-params.s - 1.0);
    Ok(resolve(&acc).into_iter().map(|v| v * scale).collect())
}

/// Row i of the Hessian of H^g: entry b sums w_k g_s''(S/N) over arcs containing both i and b.
pub fn gap_hessian_row(gaps: &GapVector, i: usize, params: &Params) -> Result<Vec<f64>> {
    check_gaps(gaps, params)?;
    let n = gaps.len();
    if i >= n {
        return Err(Error::Usage(format!("row {i} out of range")));
    }
    let nf = n as f64;
    let p = prefix_positions(gaps.as_slice());
    let mut acc = vec![0.0; n + 1];
    for k in 1..=n / 2 {
        let w = arc_weight(k, n);
        for back in 0..k {
            let t = (i + n - back) % n;
            let sv = arc_sum(&p, t, k) / nf;
            let d2 = riesz_kernel_deriv(params.s, sv, 2)
                .map_err(|_| Error::Degenerate(format!("singular Hessian: arc sum {sv}")))?;
            add_arc(&mut acc, t, k, w * d2);
        }
    }
    let scale = nf.powf(-params.s - 2.0);
    Ok(resolve(&acc).into_iter().map(|v| v * scale).collect())
}

/// Hessian row at uniform gaps, indexed by forward lag e.
///
/// Entry e = N^{-s-2} [Σ_{k>e} w_k (k-e) g''(k/N) + Σ_{k>N-e} w_k (k-N+e) g''(k/N)],
/// evaluated with suffix sums in O(N).
pub fn uniform_gap_hessian_row(n: usize, s: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Usage("n must be at least 2".into()));
    }
    let kmax = n / 2;
    let nf = n as f64;
    // a[e] = Σ_{k>e} w k g'', b[e] = Σ_{k>e} w g''
    let mut a = vec![0.0; kmax + 1];
    let mut b = vec![0.0; kmax + 1];
    for k in (1..=kmax).rev() {
        let wg = arc_weight(k, n) * riesz_kernel_deriv(s, k as f64 / nf, 2)?;
        a[k - 1] = a[k] + wg * k as f64;
        b[k - 1] = b[k] + wg;
    }
    let part = |e: usize| if e < kmax { a[e] - e as f64 * b[e] } else { 0.0 };
    let scale = nf.powf(-s - 2.0);
    Ok((0..n).map(|e| scale * (part(e) + if e == 0 { 0.0 } else { part(n - e) })).collect())
}

pub fn uniform_gap_hessian(params: &Params) -> Result<CirculantOperator<f64>> {
    CirculantOperator::from_row(uniform_gap_hessian_row(params.n, params.s)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianConcentration {
    /// Lags 1..=⌊N/2⌋.
    pub lags: Vec<usize>,
    /// max over sampled rows of |H(i, i±d) - 2N^{-s} g_s(d/N) - b_i|, with b_i the
    /// row's offset at the antipodal lag.
    pub max_deviation: Vec<f64>,
    /// max over sampled rows of |H(i, i±d) - H_uniform(d)|.
    pub uniform_deviation: Vec<f64>,
    /// Decay of `max_deviation` over [4, N/8], when that window holds enough lags.
    pub fit: Option<DecayFit>,
    pub rows: Vec<usize>,
}

/// At most this many rows are sampled.
pub const MAX_CONCENTRATION_ROWS: usize = 32;

pub fn hessian_concentration_check(gaps: &GapVector, params: &Params, rows: &[usize]) -> Result<HessianConcentration> {
    check_gaps(gaps, params)?;
    let n = gaps.len();
    let kmax = n / 2;
    let nf = n as f64;
    let rows: Vec<usize> = rows.iter().copied().take(MAX_CONCENTRATION_ROWS).collect();
    let uniform = uniform_gap_hessian_row(n, params.s)?;
    let reference: Vec<f64> = (0..=kmax)
        .map(|d| if d == 0 { 0.0 } else { 2.0 * nf.powf(-params.s) * riesz_kernel(params.s, d as f64 / nf).unwrap_or(0.0) })
        .collect();
    let mut max_dev = vec![0.0f64; kmax];
    let mut uni_dev = vec![0.0f64; kmax];
    for &i in &rows {
        let row = gap_hessian_row(gaps, i, params)?;
        let gauge = row[(i + kmax) % n] - reference[kmax];
        for d in 1..=kmax {
            for j in [(i + d) % n, (i + n - d) % n] {
                max_dev[d - 1] = max_dev[d - 1].max((row[j] - reference[d] - gauge).abs());
                uni_dev[d - 1] = uni_dev[d - 1].max((row[j] - uniform[d]).abs());
            }
        }
    }
    let lags: Vec<usize> = (1..=kmax).collect();
    let fit = if n / 8 >= 8 {
        let xs: Vec<f64> = lags.iter().map(|&d| d as f64).collect();
        fit_power_law(&xs, &max_dev, None, (4, n / 8)).ok()
    } else {
        None
    };
    Ok(HessianConcentration { lags, max_deviation: max_dev, uniform_deviation: uni_dev, fit, rows })
}
