//! Configurations on the unit circle, the nearest-neighbour gap map and the
//! circular index metric.
//!
//! Indices are 0-based throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the gap-sum constraint.
pub const GAP_SUM_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub s: f64,
    pub beta: f64,
}

impl Params {
    pub fn new(n: usize, s: f64, beta: f64) -> Result<Self> {
        let p = Params { n, s, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Usage(format!("n = {} but at least 2 particles are needed", self.n)));
        }
        if !(self.s > 0.0) || self.s == 1.0 || !self.s.is_finite() {
            return Err(Error::Usage(format!("s = {} must be positive and different from 1", self.s)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Usage(format!("beta = {} must be positive", self.beta)));
        }
        Ok(())
    }

    pub fn long_range(&self) -> bool {
        self.s < 1.0
    }
}

/// Sorted angles in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<f64>,
}

impl Configuration {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Usage("a configuration needs at least 2 points".into()));
        }
        for &x in &points {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::Domain(format!("point {x} outside [0, 1)")));
            }
        }
        for w in points.windows(2) {
            if w[1] == w[0] {
                return Err(Error::Degenerate(format!("duplicate point {}", w[0])));
            }
            if w[1] < w[0] {
                return Err(Error::Usage("points must be strictly increasing".into()));
            }
        }
        Ok(Configuration { points })
    }

    /// `n` equally spaced points starting at `x1`.
    pub fn uniform(n: usize, x1: f64) -> Result<Self> {
        let mut pts: Vec<f64> = (0..n).map(|k| (x1 + k as f64 / n as f64).rem_euclid(1.0)).collect();
        pts.sort_by(f64::total_cmp);
        Configuration::new(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rigid rotation by `t`, re-sorted.
    pub fn shifted(&self, t: f64) -> Result<Self> {
        let mut pts: Vec<f64> = self.points.iter().map(|x| (x + t).rem_euclid(1.0)).collect();
        for x in pts.iter_mut() {
            if *x >= 1.0 {
                *x = 0.0;
            }
        }
        pts.sort_by(f64::total_cmp);
        Configuration::new(pts)
    }
}

/// Nearest-neighbour gaps scaled by N, so that they sum to N.
#[derive(Debug, Clone, PartialEq)]
pub struct GapVector {
    gaps: Vec<f64>,
}

impl GapVector {
    pub fn new(gaps: Vec<f64>) -> Result<Self> {
        let n = gaps.len();
        if n < 2 {
            return Err(Error::Usage("a gap vector needs at least 2 entries".into()));
        }
        for (i, &y) in gaps.iter().enumerate() {
            if !(y > 0.0) || !y.is_finite() {
                return Err(Error::Degenerate(format!("gap {i} = {y} is not positive")));
            }
        }
        let sum = kahan_sum(gaps.iter().copied());
        if (sum - n as f64).abs() > GAP_SUM_RTOL * n as f64 {
            return Err(Error::Constraint { sum, n });
        }
        Ok(GapVector { gaps })
    }

    pub fn uniform(n: usize) -> Self {
        GapVector { gaps: vec![1.0; n] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gaps
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.gaps
    }

    pub fn sum(&self) -> f64 {
        kahan_sum(self.gaps.iter().copied())
    }
}

/// min(|j - i|, n - |j - i|) for 0-based indices.
pub fn circ_distance(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= n || j >= n {
        return Err(Error::Usage(format!("index out of range: ({i}, {j}) with n = {n}")));
    }
    Ok(lag(i, j, n))
}

/// Unchecked circular lag.
#[inline]
pub fn lag(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

pub fn gaps_of(config: &Configuration) -> Result<GapVector> {
    let x = config.points();
    let n = x.len();
    let nf = n as f64;
    let mut gaps = Vec::with_capacity(n);
    for i in 0..n {
        let next = if i + 1 < n { x[i + 1] } else { x[0] + 1.0 };
        let y = nf * (next - x[i]);
        if !(y > 0.0) {
            return Err(Error::Degenerate(format!("points {i} and {} coincide", (i + 1) % n)));
        }
        gaps.push(y);
    }
    // Push the rounding residue into the largest gap so the sum is N.
    let resid = nf - kahan_sum(gaps.iter().copied());
    let imax = argmax(&gaps);
    gaps[imax] += resid;
    GapVector::new(gaps)
}

/// Inverse of [`gaps_of`] anchored at `x1`. Points that wrap past 1 are
/// reduced and the result is re-sorted, so with `x1 > 0` the recovered gap
/// vector may come back cyclically rotated.
pub fn config_of(gaps: &GapVector, x1: f64) -> Result<Configuration> {
    if !(0.0..1.0).contains(&x1) {
        return Err(Error::Domain(format!("anchor {x1} outside [0, 1)")));
    }
    let n = gaps.len();
    let sum = gaps.sum();
    if (sum - n as f64).abs() > GAP_SUM_RTOL * n as f64 {
        return Err(Error::Constraint { sum, n });
    }
    let nf = n as f64;
    let mut pts = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut comp = 0.0;
    for (k, &y) in gaps.as_slice().iter().enumerate() {
        let mut x = (x1 + acc / nf).rem_euclid(1.0);
        if x >= 1.0 {
            x = 0.0;
        }
        pts.push(x);
        if k + 1 < n {
            let t = y - comp;
            let s = acc + t;
            comp = (s - acc) - t;
            acc = s;
        }
    }
    pts.sort_by(f64::total_cmp);
    Configuration::new(pts)
}

/// Prefix positions in gap units: p[0] = 0, p[k] = y_0 + ... + y_{k-1}, p[n] = n.
pub fn prefix_positions(gaps: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(gaps.len() + 1);
    let mut acc = 0.0;
    let mut comp = 0.0;
    p.push(0.0);
    for &y in gaps {
        let t = y - comp;
        let s = acc + t;
        comp = (s - acc) - t;
        acc = s;
        p.push(acc);
    }
    p
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in it {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
