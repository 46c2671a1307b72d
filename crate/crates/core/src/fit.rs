//! Weighted least-squares power-law fits in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Magnitudes below this are treated as exact zeros and left out of fits.
pub const FIT_ZERO: f64 = 1e-14;
/// r² below this marks the fit as unreliable.
pub const POOR_FIT_R2: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitFlags {
    /// The fitted quantity changes sign inside the window; the fit is of |y|.
    pub sign_alternating: bool,
    /// Some entries were (numerically) zero and excluded.
    pub zeros_excluded: bool,
    pub poor_fit: bool,
}

impl FitFlags {
    pub fn any(&self) -> bool {
        self.sign_alternating || self.zeros_excluded || self.poor_fit
    }
}

/// y ≈ amplitude · x^exponent over `window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub window: (usize, usize),
    pub r_squared: f64,
    pub points_used: usize,
    pub flags: FitFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FitMode {
    /// Every integer lag in the window.
    AllPoints,
    /// Maximum magnitude over each dyadic bin [2^j d_min, 2^{j+1} d_min), placed at the bin start.
    #[default]
    DyadicEnvelope,
}

/// Fit |y| = A x^p by weighted least squares on (log x, log |y|).
/// With errors, each point is weighted by (|y| / err)², the inverse variance of log |y|.
pub fn fit_power_law<T: Scalar>(xs: &[T], ys: &[T], errs: Option<&[T]>, window: (usize, usize)) -> Result<DecayFit> {
    if xs.len() != ys.len() || errs.is_some_and(|e| e.len() != xs.len()) {
        return Err(Error::Usage("fit inputs have mismatched lengths".into()));
    }
    if window.0 >= window.1 {
        return Err(Error::Usage(format!("empty fit window {window:?}")));
    }
    let (lo, hi) = (window.0 as f64, window.1 as f64);
    let mut flags = FitFlags::default();
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    let mut last_sign = 0.0;
    for i in 0..xs.len() {
        let x = xs[i].to_f64_lossy();
        if !(x >= lo && x <= hi) {
            continue;
        }
        let y = ys[i].to_f64_lossy();
        if !y.is_finite() {
            return Err(Error::Numerical(format!("non-finite value at x = {x}")));
        }
        if y.abs() < FIT_ZERO {
            flags.zeros_excluded = true;
            continue;
        }
        let sign = y.signum();
        if last_sign != 0.0 && sign != last_sign {
            flags.sign_alternating = true;
        }
        last_sign = sign;
        let w = match errs {
            Some(e) => {
                let e = e[i].to_f64_lossy();
                if e > 0.0 && e.is_finite() {
                    (y.abs() / e).powi(2)
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        pts.push((x.ln(), y.abs().ln(), w));
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable points in window {window:?}", pts.len())));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("all fit abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    if r2 < POOR_FIT_R2 {
        flags.poor_fit = true;
    }
    if flags.any() {
        log::warn!("power-law fit over {window:?}: {flags:?}");
    }
    Ok(DecayFit { exponent: slope, amplitude: intercept.exp(), window, r_squared: r2, points_used: pts.len(), flags })
}

/// Envelope of |values[d]| over dyadic bins inside the inclusive window.
pub fn dyadic_envelope<T: Scalar>(values: &[T], window: (usize, usize)) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut j = lo.max(1);
    while j <= hi && j < values.len() {
        let end = (2 * j - 1).min(hi).min(values.len() - 1);
        let m = values[j..=end].iter().map(|v| v.to_f64_lossy().abs()).fold(0.0, f64::max);
        xs.push(j as f64);
        ys.push(m);
        j *= 2;
    }
    (xs, ys)
}

/// Decay fit of a lag-indexed sequence.
pub fn fit_lag_decay<T: Scalar>(values: &[T], window: (usize, usize), mode: FitMode) -> Result<DecayFit> {
    match mode {
        FitMode::AllPoints => {
            let hi = window.1.min(values.len().saturating_sub(1));
            let xs: Vec<f64> = (window.0..=hi).map(|d| d as f64).collect();
            let ys: Vec<f64> = (window.0..=hi).map(|d| values[d].to_f64_lossy()).collect();
            fit_power_law(&xs, &ys, None, window)
        }
        FitMode::DyadicEnvelope => {
            let (xs, ys) = dyadic_envelope(values, window);
            let mut fit = fit_power_law(&xs, &ys, None, window)?;
            // The envelope discards sign; report whether the raw values alternate.
            let hi = window.1.min(values.len().saturating_sub(1));
            let raw = &values[window.0.min(hi)..=hi];
            let pos = raw.iter().any(|v| v.to_f64_lossy() > FIT_ZERO);
            let neg = raw.iter().any(|v| v.to_f64_lossy() < -FIT_ZERO);
            fit.flags.sign_alternating |= pos && neg;
            Ok(fit)
        }
    }
}
