//! Fast tabulated evaluation of g_s for the Monte Carlo inner loop.
//!
//! With d = min(x, 1 - x), g_s(x) = d^{-s} + q(d) where
//! q(d) = ζ(s, 1 + d) + ζ(s, 1 - d) is smooth on [0, 1/2]. Far from the
//! singularity g itself is interpolated, which avoids the `powf`.

use super::zeta::{zeta_unchecked, KernelEvalOptions};
use super::{riesz_kernel, riesz_kernel_deriv};
use crate::error::{Error, Result};

const Q_INTERVALS: usize = 2048;
const G_INTERVALS: usize = 8192;
/// Below this distance the singular part is evaluated exactly.
const D_SPLIT: f64 = 1.0 / 32.0;

#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    s: f64,
    q: HermiteTable,
    g: HermiteTable,
}

#[derive(Debug, Clone)]
struct HermiteTable {
    lo: f64,
    inv_h: f64,
    h: f64,
    /// Cubic Hermite interpolant on each interval, as power-basis coefficients in the local coordinate.
    coeffs: Vec<[f64; 4]>,
}

impl HermiteTable {
    fn build(lo: f64, hi: f64, intervals: usize, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let h = (hi - lo) / intervals as f64;
        // (value, h * slope) at each node
        let nodes: Vec<(f64, f64)> = (0..=intervals)
            .map(|i| {
                let x = if i == intervals { hi } else { lo + i as f64 * h };
                let (v, dv) = f(x);
                (v, h * dv)
            })
            .collect();
        let coeffs = nodes
            .windows(2)
            .map(|w| {
                let ((p0, m0), (p1, m1)) = (w[0], w[1]);
                [p0, m0, 3.0 * (p1 - p0) - 2.0 * m0 - m1, 2.0 * (p0 - p1) + m0 + m1]
            })
            .collect();
        HermiteTable { lo, inv_h: 1.0 / h, h, coeffs }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let t = (x - self.lo) * self.inv_h;
        let i = (t as usize).min(self.coeffs.len() - 1);
        let u = t - i as f64;
        let c = &self.coeffs[i];
        ((c[3] * u + c[2]) * u + c[1]) * u + c[0]
    }
}

impl TabulatedKernel {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0) || s == 1.0 || !s.is_finite() {
            return Err(Error::Domain(format!("kernel exponent s = {s} must be positive and != 1")));
        }
        let opts = KernelEvalOptions::default();
        let q = HermiteTable::build(0.0, 0.5, Q_INTERVALS, |d| {
            let v = zeta_unchecked(s, 1.0 + d, &opts) + zeta_unchecked(s, 1.0 - d, &opts);
            let dv = -s * (zeta_unchecked(s + 1.0, 1.0 + d, &opts) - zeta_unchecked(s + 1.0, 1.0 - d, &opts));
            (v, dv)
        });
        let g = HermiteTable::build(D_SPLIT, 0.5, G_INTERVALS, |d| {
            (riesz_kernel(s, d).expect("d in (0, 1/2]"), riesz_kernel_deriv(s, d, 1).expect("d in (0, 1/2]"))
        });
        Ok(TabulatedKernel { s, q, g })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// g_s at a point difference `x`, any real with x mod 1 ≠ 0.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let u = x - x.floor();
        self.eval_unit(u)
    }

    /// g_s(u) for u in (0, 1).
    #[inline]
    pub fn eval_unit(&self, u: f64) -> f64 {
        let d = if u > 0.5 { 1.0 - u } else { u };
        if d >= D_SPLIT {
            self.g.eval(d)
        } else {
            d.powf(-self.s) + self.q.eval(d)
        }
    }

    /// Node spacing of the coarser table, for diagnostics.
    pub fn spacing(&self) -> f64 {
        self.q.h.max(self.g.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_closed_form() {
        for &s in &[0.3, 0.5, 0.7, 1.5, 2.5] {
            let t = TabulatedKernel::new(s).unwrap();
            let mut worst: f64 = 0.0;
            for i in 1..5000 {
                let x = i as f64 / 5000.0 - 0.37e-4;
                let exact = riesz_kernel(s, x).unwrap();
                let rel = (t.eval(x) - exact).abs() / exact.abs().max(1.0);
                worst = worst.max(rel);
            }
            assert!(worst < 1e-10, "s={s} worst relative error {worst:e}");
        }
    }

    #[test]
    fn table_is_periodic_and_even() {
        let t = TabulatedKernel::new(0.5).unwrap();
        for &x in &[0.1, 0.33, 0.71] {
            assert!((t.eval(x) - t.eval(-x)).abs() < 1e-13);
            assert!((t.eval(x) - t.eval(x - 2.0)).abs() < 1e-12);
        }
        assert!(t.spacing() > 0.0);
    }
}
