//! Quadratic-form bound on the commutator of a decaying matrix with the
//! distortion L_α = diag(1 + d(i, i0)^α).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circle::lag;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorSettings {
    /// Declared decay exponent of the matrix, s > 1.
    pub s: f64,
    pub alpha: f64,
    pub i0: usize,
    pub trials: usize,
    pub rng_seed: u64,
    pub c0: f64,
    pub kappa: f64,
    /// Prefactor of the local-mass term.
    pub c_const: f64,
    /// Declared decay constant; measured from the matrix when absent.
    pub c_n: Option<f64>,
}

impl Default for CommutatorSettings {
    fn default() -> Self {
        CommutatorSettings {
            s: 1.5,
            alpha: 0.7,
            i0: 0,
            trials: 200,
            rng_seed: 0x5eed,
            c0: 0.25,
            kappa: 1.0,
            c_const: 1.0,
            c_n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub alpha: f64,
    pub k0: usize,
    /// C · C_N^κ, the coefficient of the local-mass term.
    pub residual_bound: f64,
    /// max over trials of (observed - bound); ≤ 0 means the bound held everywhere.
    pub max_violation: f64,
    pub c_n: f64,
    pub max_observed: f64,
    /// Smallest prefactor C that would have covered every trial.
    pub required_c: f64,
}

struct Prepared {
    delta: DMatrix<f64>,
    c_n: f64,
    k0: usize,
}

fn prepare(m: &DMatrix<f64>, st: &CommutatorSettings) -> Result<Prepared> {
    let n = m.nrows();
    if n != m.ncols() || n < 2 {
        return Err(Error::Usage("commutator diagnostic needs a square matrix of size >= 2".into()));
    }
    if !(st.s > 1.0) {
        return Err(Error::Precondition(format!("s = {} must exceed 1", st.s)));
    }
    if !(st.alpha > 0.0 && st.alpha < st.s - 0.5) {
        return Err(Error::Precondition(format!("alpha = {} must lie in (0, s - 1/2) = (0, {})", st.alpha, st.s - 0.5)));
    }
    if st.i0 >= n {
        return Err(Error::Usage(format!("i0 = {} out of range", st.i0)));
    }
    if !(st.c0 > 0.0 && st.kappa > 0.0 && st.c_const >= 0.0) {
        return Err(Error::Usage("c0 and kappa must be positive, C nonnegative".into()));
    }
    let mut measured: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = lag(i, j, n) as f64;
            let ratio = m[(i, j)].abs() * (1.0 + d.powf(st.s));
            if let Some(c) = st.c_n {
                if ratio > c * (1.0 + 1e-12) {
                    return Err(Error::Precondition(format!(
                        "entry ({i}, {j}) = {} exceeds C_N / (1 + d^s) with C_N = {c}",
                        m[(i, j)]
                    )));
                }
            }
            measured = measured.max(ratio);
        }
    }
    let c_n = st.c_n.unwrap_or(measured).max(f64::MIN_POSITIVE);
    let gamma: Vec<f64> = (0..n).map(|i| 1.0 + (lag(i, st.i0, n) as f64).powf(st.alpha)).collect();
    let delta = DMatrix::from_fn(n, n, |i, l| m[(i, l)] * (gamma[i] / gamma[l] - 1.0));
    let expo = (2.0 * st.s - 2.0).min(1.0).min(2.0 * st.s - 2.0 * st.alpha - 1.0);
    let k0 = (c_n.powf(st.kappa) / st.c0).powf(1.0 / expo).floor().max(1.0) as usize;
    Ok(Prepared { delta, c_n, k0 })
}

/// Unit test vectors: even trials are Gaussian, odd trials have a random
/// power-law envelope around a random centre.
fn trial_vector(rng: &mut ChaCha8Rng, n: usize, t: usize) -> Vec<f64> {
    let mut u: Vec<f64> = if t % 2 == 0 {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    } else {
        let c = rng.random_range(0..n);
        let p = rng.random_range(0.5..2.0);
        (0..n)
            .map(|i| rng.sample::<f64, _>(StandardNormal) * (1.0 + lag(i, c, n) as f64).powf(-p))
            .collect()
    };
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in u.iter_mut() {
        *x /= norm;
    }
    u
}

fn run_trials(st: &CommutatorSettings, p: &Prepared) -> Vec<(f64, f64, f64)> {
    let n = p.delta.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(st.rng_seed);
    (0..st.trials)
        .map(|t| {
            let u = trial_vector(&mut rng, n, t);
            let uv = nalgebra::DVector::from_vec(u);
            let q = uv.dot(&(&p.delta * &uv)).abs();
            let norm2 = uv.norm_squared();
            let local: f64 = (0..n).filter(|&i| lag(i, st.i0, n) <= p.k0).map(|i| uv[i] * uv[i]).sum();
            // (observed, c0-part, local-mass part without C)
            (q, 0.5 * st.c0 * norm2, p.c_n.powf(st.kappa) * norm2.sqrt() * local.sqrt())
        })
        .collect()
}

pub fn commutator_diagnostic(m: &DMatrix<f64>, st: &CommutatorSettings) -> Result<CommutatorReport> {
    let p = prepare(m, st)?;
    let trials = run_trials(st, &p);
    let mut max_violation = f64::NEG_INFINITY;
    let mut max_observed: f64 = 0.0;
    let mut required_c: f64 = 0.0;
    for &(q, base, local) in &trials {
        let bound = base + st.c_const * local;
        max_violation = max_violation.max(q - bound);
        max_observed = max_observed.max(q);
        if q > base {
            required_c = required_c.max(if local > 0.0 { (q - base) / local } else { f64::INFINITY });
        }
    }
    if trials.is_empty() {
        max_violation = 0.0;
    }
    Ok(CommutatorReport {
        alpha: st.alpha,
        k0: p.k0,
        residual_bound: st.c_const * p.c_n.powf(st.kappa),
        max_violation,
        c_n: p.c_n,
        max_observed,
        required_c,
    })
}

/// Smallest C covering every trial on `m` (typically a small calibration matrix).
pub fn calibrate_commutator_constant(m: &DMatrix<f64>, st: &CommutatorSettings) -> Result<f64> {
    let rep = commutator_diagnostic(m, &CommutatorSettings { c_const: 0.0, ..*st })?;
    if !rep.required_c.is_finite() {
        return Err(Error::Numerical("calibration trial violates the bound with no local mass".into()));
    }
    Ok(rep.required_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_riesz_matrix;

    #[test]
    fn diagonal_commutes() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(64, |i, _| 1.0 + i as f64));
        let st = CommutatorSettings { trials: 20, ..Default::default() };
        let p = prepare(&m, &st).unwrap();
        assert!(p.delta.iter().all(|&x| x == 0.0));
        let rep = commutator_diagnostic(&m, &st).unwrap();
        assert_eq!(rep.max_observed, 0.0);
        assert!(rep.max_violation <= 0.0);
    }

    #[test]
    fn alpha_precondition() {
        let m = build_riesz_matrix(32, 1.5f64).unwrap().to_dense();
        let st = CommutatorSettings { alpha: 1.0, ..Default::default() };
        assert!(matches!(commutator_diagnostic(&m, &st), Err(Error::Precondition(_))));
        let st = CommutatorSettings { s: 0.5, alpha: 0.1, ..Default::default() };
        assert!(matches!(commutator_diagnostic(&m, &st), Err(Error::Precondition(_))));
    }

    #[test]
    fn decay_precondition_reports_entry() {
        let mut m = build_riesz_matrix(32, 1.5f64).unwrap().to_dense();
        m[(0, 16)] = 1.0;
        let st = CommutatorSettings { c_n: Some(1.0), trials: 1, ..Default::default() };
        match commutator_diagnostic(&m, &st) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("(0, 16)")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn riesz_matrix_measured_constant() {
        let m = build_riesz_matrix(64, 1.5f64).unwrap().to_dense();
        let st = CommutatorSettings { trials: 10, ..Default::default() };
        let rep = commutator_diagnostic(&m, &st).unwrap();
        assert!(rep.c_n <= 1.0 + 1e-12);
        assert!(rep.k0 >= 1);
    }

    #[test]
    fn deterministic_trials() {
        let m = build_riesz_matrix(64, 1.5f64).unwrap().to_dense();
        let st = CommutatorSettings { trials: 30, ..Default::default() };
        assert_eq!(commutator_diagnostic(&m, &st).unwrap(), commutator_diagnostic(&m, &st).unwrap());
    }
}
