//! Frozen-Hessian (Gaussian) approximation of the Helffer–Sjöstrand system:
//! constrained solves with a Lagrange multiplier, the predicted gap covariance
//! and the Brascamp–Lieb variance bound.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::circle::Params;
use crate::energy::uniform_gap_hessian;
use crate::error::{Error, Result};
use crate::spectral::{apply, build_riesz_matrix, CirculantOperator};

/// Residual tolerance of every solve, relative to the forcing.
pub const SOLVE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MeanFieldMatrix {
    /// Exact Hessian of the gap energy at uniform gaps.
    #[default]
    UniformHessian,
    /// Riesz matrix (1 + d)^{-s}.
    BareRiesz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedSolve {
    pub psi: Vec<f64>,
    pub lambda: f64,
    /// ‖βMψ − forcing − λ1‖∞.
    pub residual: f64,
}

pub fn meanfield_matrix(params: &Params, kind: MeanFieldMatrix) -> Result<CirculantOperator<f64>> {
    params.validate()?;
    match kind {
        MeanFieldMatrix::UniformHessian => uniform_gap_hessian(params),
        MeanFieldMatrix::BareRiesz => build_riesz_matrix(params.n, params.s),
    }
}

/// Inverse on 1⊥, zero on the constant mode.
pub fn pseudo_inverse(m: &CirculantOperator<f64>) -> Result<CirculantOperator<f64>> {
    let eig = m.eigenvalues();
    let n = eig.len();
    let radius = eig.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    if n < 2 || eig[1..].iter().all(|l| l.abs() <= 1e-300) {
        return Err(Error::NearSingular { mode: 0, value: radius });
    }
    let floor = 1e-12 * radius;
    for (k, &l) in eig.iter().enumerate().skip(1) {
        if !(l > floor) {
            return Err(Error::NearSingular { mode: k, value: l });
        }
    }
    let inv: Vec<f64> = eig.iter().enumerate().map(|(k, &l)| if k == 0 { 0.0 } else { 1.0 / l }).collect();
    CirculantOperator::from_eigenvalues(inv)
}

/// λ = (1/N)(β 1·Mψ − 1·forcing), the multiplier that makes βMψ − forcing − λ1 orthogonal to 1.
pub fn lagrange_multiplier(m: &CirculantOperator<f64>, psi: &[f64], forcing: &[f64], beta: f64) -> Result<f64> {
    let mpsi = apply(m, psi)?;
    let n = psi.len() as f64;
    Ok((beta * mpsi.iter().sum::<f64>() - forcing.iter().sum::<f64>()) / n)
}

/// Solves βMψ = forcing + λ1 with ψ·1 = 0.
pub fn solve_constrained(m: &CirculantOperator<f64>, forcing: &[f64], beta: f64) -> Result<ConstrainedSolve> {
    let n = m.len();
    if forcing.len() != n {
        return Err(Error::Usage(format!("forcing has length {}, operator size {n}", forcing.len())));
    }
    if !(beta > 0.0) {
        return Err(Error::Usage(format!("beta = {beta} must be positive")));
    }
    let pinv = pseudo_inverse(m)?;
    let mean = forcing.iter().sum::<f64>() / n as f64;
    let projected: Vec<f64> = forcing.iter().map(|f| f - mean).collect();
    let mut psi: Vec<f64> = apply(&pinv, &projected)?.into_iter().map(|v| v / beta).collect();
    let drift = psi.iter().sum::<f64>() / n as f64;
    psi.iter_mut().for_each(|v| *v -= drift);
    let lambda = lagrange_multiplier(m, &psi, forcing, beta)?;
    let mpsi = apply(m, &psi)?;
    let residual = mpsi
        .iter()
        .zip(forcing)
        .map(|(a, f)| (beta * a - f - lambda).abs())
        .fold(0.0, f64::max);
    let scale = forcing.iter().fold(0.0f64, |a, f| a.max(f.abs())).max(f64::MIN_POSITIVE);
    if residual > SOLVE_RTOL * scale {
        return Err(Error::Numerical(format!("constrained solve residual {residual:e}")));
    }
    Ok(ConstrainedSolve { psi, lambda, residual })
}

/// Forcing e_{i0}.
pub fn solve_meanfield(m: &CirculantOperator<f64>, i0: usize, beta: f64) -> Result<ConstrainedSolve> {
    let n = m.len();
    if i0 >= n {
        return Err(Error::Usage(format!("i0 = {i0} out of range for n = {n}")));
    }
    let mut e = vec![0.0; n];
    e[i0] = 1.0;
    solve_constrained(m, &e, beta)
}

/// Lag covariances 0..=⌊N/2⌋ of the Gaussian with energy (β/2) y·M·y on 1·y = N.
pub fn predicted_gap_covariance(params: &Params) -> Result<Vec<f64>> {
    predicted_gap_covariance_with(params, MeanFieldMatrix::default())
}

pub fn predicted_gap_covariance_with(params: &Params, kind: MeanFieldMatrix) -> Result<Vec<f64>> {
    let m = meanfield_matrix(params, kind)?;
    let pinv = pseudo_inverse(&m)?;
    Ok(pinv.first_row()[..=params.n / 2].iter().map(|v| v / params.beta).collect())
}

/// cov(d) − cov(⌊N/2⌋): removes the O(1/N) offset the constraint adds at every lag.
pub fn subtract_constraint_floor(cov: &[f64]) -> Vec<f64> {
    let floor = cov.last().copied().unwrap_or(0.0);
    cov.iter().map(|c| c - floor).collect()
}

pub fn write_covariance_csv<W: Write>(cov: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "lag,covariance")?;
    for (d, c) in cov.iter().enumerate() {
        writeln!(w, "{d},{c}")?;
    }
    Ok(())
}

/// β⁻¹ v·M⁺v for v projected onto 1⊥ (the part of the direction seen by gap statistics).
pub fn brascamp_lieb_bound(m: &CirculantOperator<f64>, direction: &[f64], beta: f64) -> Result<f64> {
    let n = m.len();
    if direction.len() != n {
        return Err(Error::Usage(format!("direction has length {}, operator size {n}", direction.len())));
    }
    if !(beta > 0.0) {
        return Err(Error::Usage(format!("beta = {beta} must be positive")));
    }
    let mean = direction.iter().sum::<f64>() / n as f64;
    let v: Vec<f64> = direction.iter().map(|x| x - mean).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 1e-12 * scale) {
        return Err(Error::Degenerate("direction is parallel to the all-ones vector".into()));
    }
    let pinv = pseudo_inverse(m)?;
    let w = apply(&pinv, &v)?;
    Ok(v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / beta)
}
