//! Symmetric circulant operators on the discrete circle, diagonalised by the DFT.

mod commutator;

pub use commutator::{calibrate_commutator_constant, commutator_diagnostic, CommutatorReport, CommutatorSettings};

use std::io::Write;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::circle::lag;
use crate::error::{Error, Result};
use crate::fit::{fit_lag_decay, fit_power_law, DecayFit, FitMode};
use crate::kernel::riesz_kernel_cell_averages;
use crate::scalar::Scalar;

/// Relative tolerance for the realness and lag-symmetry checks.
const SYMMETRY_RTOL: f64 = 1e-9;

/// Symmetric circulant matrix: entry (i, j) is `first_row[(j - i) mod n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantOperator<T> {
    first_row: Vec<T>,
    eigenvalues: Vec<T>,
}

fn fft_forward<T: Scalar>(v: &[T]) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = v.iter().map(|&x| Complex::new(x, T::zero())).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn fft_inverse_real<T: Scalar>(mut buf: Vec<Complex<T>>) -> Vec<T> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let inv_n = T::of_usize(n).recip();
    buf.into_iter().map(|c| c.re * inv_n).collect()
}

/// 1e-9 in double precision, a few hundred ulps in single.
fn rtol<T: Scalar>() -> T {
    T::lit(SYMMETRY_RTOL).max(T::epsilon() * T::lit(256.0))
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

impl<T: Scalar> CirculantOperator<T> {
    pub fn from_row(first_row: Vec<T>) -> Result<Self> {
        let n = first_row.len();
        if n < 1 {
            return Err(Error::Usage("empty circulant row".into()));
        }
        let scale = max_abs(&first_row).max(T::min_positive_value());
        let tol = rtol::<T>() * scale;
        for d in 1..n {
            if (first_row[d] - first_row[n - d]).abs() > tol {
                return Err(Error::Usage(format!("row is not lag-symmetric at lag {d}")));
            }
        }
        let spec = fft_forward(&first_row);
        let sum_abs = first_row.iter().fold(T::zero(), |a, x| a + x.abs());
        let itol = rtol::<T>() * sum_abs.max(T::one());
        if let Some(k) = spec.iter().position(|c| c.im.abs() > itol) {
            return Err(Error::Numerical(format!("eigenvalue {k} has an imaginary part")));
        }
        let eigenvalues = spec.into_iter().map(|c| c.re).collect();
        Ok(CirculantOperator { first_row, eigenvalues })
    }

    /// Operator with prescribed spectrum; requires λ_k = λ_{n-k}.
    pub fn from_eigenvalues(eigenvalues: Vec<T>) -> Result<Self> {
        let n = eigenvalues.len();
        if n < 1 {
            return Err(Error::Usage("empty spectrum".into()));
        }
        let tol = rtol::<T>() * max_abs(&eigenvalues).max(T::min_positive_value());
        for k in 1..n {
            if (eigenvalues[k] - eigenvalues[n - k]).abs() > tol {
                return Err(Error::Usage(format!("spectrum is not mode-symmetric at k = {k}")));
            }
        }
        let mut row = fft_inverse_real(eigenvalues.iter().map(|&l| Complex::new(l, T::zero())).collect());
        let half = T::lit(0.5);
        for d in 1..=n / 2 {
            let avg = (row[d] + row[n - d]) * half;
            row[d] = avg;
            row[n - d] = avg;
        }
        Ok(CirculantOperator { first_row: row, eigenvalues })
    }

    pub fn identity(n: usize) -> Self {
        let mut row = vec![T::zero(); n];
        row[0] = T::one();
        CirculantOperator { first_row: row, eigenvalues: vec![T::one(); n] }
    }

    pub fn len(&self) -> usize {
        self.first_row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_row.is_empty()
    }

    pub fn first_row(&self) -> &[T] {
        &self.first_row
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Entry (i, j).
    pub fn entry(&self, i: usize, j: usize) -> T {
        let n = self.len();
        self.first_row[(j + n - i % n) % n]
    }

    /// Σ_j row entries, i.e. the zero-mode eigenvalue.
    pub fn row_sum(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j).to_f64_lossy())
    }

    /// Product of two circulants (they commute).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Usage("operator sizes differ".into()));
        }
        let eig: Vec<T> = self.eigenvalues.iter().zip(&other.eigenvalues).map(|(a, b)| *a * *b).collect();
        CirculantOperator::from_eigenvalues(eig)
    }

    /// CSV with one line per lag: lag,row_value,eigenvalue.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lag,row_value,eigenvalue")?;
        for d in 0..self.len() {
            writeln!(w, "{},{},{}", d, self.first_row[d], self.eigenvalues[d])?;
        }
        Ok(())
    }
}

/// Riesz matrix with entries (1 + d(i, j))^{-s}.
pub fn build_riesz_matrix<T: Scalar>(n: usize, s: T) -> Result<CirculantOperator<T>> {
    if n < 2 {
        return Err(Error::Usage(format!("n = {n} must be at least 2")));
    }
    if !(s > T::zero()) || !s.is_finite() {
        return Err(Error::Usage(format!("s = {s} must be positive")));
    }
    let row = (0..n).map(|d| (T::of_usize(1 + lag(0, d, n))).powf(-s)).collect();
    CirculantOperator::from_row(row)
}

pub fn apply<T: Scalar>(op: &CirculantOperator<T>, v: &[T]) -> Result<Vec<T>> {
    if v.len() != op.len() {
        return Err(Error::Usage(format!("vector length {} does not match operator size {}", v.len(), op.len())));
    }
    let mut spec = fft_forward(v);
    for (c, &l) in spec.iter_mut().zip(&op.eigenvalues) {
        *c = *c * l;
    }
    Ok(fft_inverse_real(spec))
}

/// Default eigenvalue floor, 1e-12 times the spectral radius.
pub fn default_eig_floor<T: Scalar>(op: &CirculantOperator<T>) -> T {
    T::lit(1e-12) * max_abs(&op.eigenvalues)
}

pub fn invert<T: Scalar>(op: &CirculantOperator<T>, eig_floor: Option<T>) -> Result<CirculantOperator<T>> {
    let floor = eig_floor.unwrap_or_else(|| default_eig_floor(op));
    for (k, &l) in op.eigenvalues.iter().enumerate() {
        if !(l.abs() > floor) {
            return Err(Error::NearSingular { mode: k, value: l.to_f64_lossy() });
        }
    }
    let eig: Vec<T> = op.eigenvalues.iter().map(|l| l.recip()).collect();
    CirculantOperator::from_eigenvalues(eig)
}

/// Truncated periodic zeta function Σ_{m=1}^{cutoff} m^{-s} cos(mθ).
pub fn periodic_zeta_symbol<T: Scalar>(s: T, theta: T, cutoff: usize) -> Result<T> {
    if cutoff < 1 {
        return Err(Error::Usage("cutoff must be at least 1".into()));
    }
    if theta == T::zero() && s <= T::one() {
        return Err(Error::Domain("periodic zeta diverges at theta = 0 for s <= 1".into()));
    }
    let mut acc = T::zero();
    let mut comp = T::zero();
    for m in (1..=cutoff).rev() {
        let mf = T::of_usize(m);
        let y = mf.powf(-s) * (mf * theta).cos() - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    Ok(acc)
}

fn check_decay_window(n: usize, window: (usize, usize)) -> Result<()> {
    if window.0 < 4 || window.1 > n / 8 || window.0 >= window.1 {
        return Err(Error::Usage(format!("decay window {window:?} must lie inside [4, {}]", n / 8)));
    }
    Ok(())
}

/// Power-law fit of |first_row[d]| over the window (dyadic magnitude envelope).
pub fn inverse_row_decay<T: Scalar>(op_inv: &CirculantOperator<T>, window: (usize, usize)) -> Result<DecayFit> {
    inverse_row_decay_with(op_inv, window, FitMode::DyadicEnvelope)
}

pub fn inverse_row_decay_with<T: Scalar>(
    op_inv: &CirculantOperator<T>,
    window: (usize, usize),
    mode: FitMode,
) -> Result<DecayFit> {
    check_decay_window(op_inv.len(), window)?;
    fit_lag_decay(op_inv.first_row(), window, mode)
}

/// Sparse approximate inverse with spacing k0: the inverse Riesz row at size
/// n / k0, dilated so that only lags that are multiples of k0 are nonzero.
pub fn build_sparse_approx_inverse<T: Scalar>(n: usize, s: T, k0: usize) -> Result<CirculantOperator<T>> {
    if k0 < 1 || k0 > n / 8 || n % k0 != 0 {
        return Err(Error::Degenerate(format!("spacing k0 = {k0} must divide n = {n} and satisfy 1 <= k0 <= n/8")));
    }
    let m = n / k0;
    let coarse = invert(&build_riesz_matrix(m, s)?, None)?;
    let mut row = vec![T::zero(); n];
    for j in 0..m {
        row[j * k0] = coarse.first_row()[j];
    }
    CirculantOperator::from_row(row)
}

/// Row of the Riesz matrix convolved with the approximate inverse.
pub fn approx_inverse_residual<T: Scalar>(n: usize, s: T, approx: &CirculantOperator<T>) -> Result<Vec<T>> {
    let h = build_riesz_matrix(n, s)?;
    Ok(h.compose(approx)?.first_row().to_vec())
}

/// Fourier coefficients of g_s averaged over the n grid cells, indexed by mode k.
pub fn kernel_fourier_coefficients<T: Scalar>(s: T, n: usize) -> Result<Vec<T>> {
    let cells = riesz_kernel_cell_averages(s, n)?;
    let inv_n = T::of_usize(n).recip();
    Ok(fft_forward(&cells).into_iter().map(|c| c.re * inv_n).collect())
}

/// Fit of |ĝ_s(k)| ∝ |k|^{s-1} over the given mode window.
pub fn fourier_power_law<T: Scalar>(s: T, n: usize, window: (usize, usize)) -> Result<DecayFit> {
    if window.1 > n / 2 {
        return Err(Error::Usage(format!("mode window {window:?} exceeds n/2")));
    }
    let coef = kernel_fourier_coefficients(s, n)?;
    let ks: Vec<f64> = (window.0..=window.1).map(|k| k as f64).collect();
    let ys: Vec<f64> = (window.0..=window.1).map(|k| coef[k].to_f64_lossy()).collect();
    fit_power_law(&ks, &ys, None, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_inverse(op: &CirculantOperator<f64>) -> DMatrix<f64> {
        op.to_dense().lu().try_inverse().unwrap()
    }

    #[test]
    fn riesz_row_example() {
        let op = build_riesz_matrix(4, 1.0f64).unwrap();
        assert_eq!(op.first_row(), &[1.0, 0.5, 1.0 / 3.0, 0.5]);
        let sum: f64 = op.first_row().iter().sum();
        assert!((op.eigenvalues()[0] - sum).abs() < 1e-14);
    }

    #[test]
    fn riesz_positive_definite_large() {
        let op = build_riesz_matrix(4096, 0.5f64).unwrap();
        assert!(op.min_eigenvalue() > 0.0);
    }

    #[test]
    fn eigenvalues_are_cosine_sums() {
        for &n in &[7usize, 16, 33] {
            let op = build_riesz_matrix(n, 0.5f64).unwrap();
            for k in 0..n {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let direct: f64 = (0..n).map(|d| op.first_row()[d] * (theta * d as f64).cos()).sum();
                assert!((direct - op.eigenvalues()[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eigenvalues_from_symbol_shape() {
        // λ_k = 1 + 2 Σ_{1≤d<n/2} (1+d)^{-s} cos(dθ) + (1+n/2)^{-s} cos(nθ/2), n even.
        let n = 64usize;
        let s = 0.7f64;
        let op = build_riesz_matrix(n, s).unwrap();
        for k in 0..n {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let mut v = 1.0;
            for d in 1..n / 2 {
                v += 2.0 * (1.0 + d as f64).powf(-s) * (d as f64 * theta).cos();
            }
            v += (1.0 + (n / 2) as f64).powf(-s) * ((n / 2) as f64 * theta).cos();
            assert!((v - op.eigenvalues()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn invert_identity() {
        let id = CirculantOperator::<f64>::identity(8);
        assert_eq!(invert(&id, None).unwrap(), id);
    }

    #[test]
    fn invert_matches_dense_lu() {
        for &s in &[0.3, 0.5, 0.7, 1.5] {
            let op = build_riesz_matrix(64, s).unwrap();
            let inv = invert(&op, None).unwrap();
            let dense = dense_inverse(&op);
            let fast = inv.to_dense();
            let diff = (dense - fast).abs().max();
            assert!(diff <= 1e-10, "s={s} diff={diff:e}");
        }
    }

    #[test]
    fn singular_operator_reports_mode() {
        // Row (1, -1/2, 0, ..., -1/2) has λ_0 = 0.
        let mut row = vec![0.0f64; 8];
        row[0] = 1.0;
        row[1] = -0.5;
        row[7] = -0.5;
        let op = CirculantOperator::from_row(row).unwrap();
        match invert(&op, None) {
            Err(Error::NearSingular { mode, .. }) => assert_eq!(mode, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn apply_examples() {
        let op = build_riesz_matrix(16, 0.5f64).unwrap();
        let mut e0 = vec![0.0; 16];
        e0[0] = 1.0;
        let col = apply(&op, &e0).unwrap();
        for d in 0..16 {
            assert!((col[d] - op.entry(d, 0)).abs() < 1e-14);
        }
        let ones = apply(&op, &vec![1.0; 16]).unwrap();
        for v in ones {
            assert!((v - op.eigenvalues()[0]).abs() < 1e-13);
        }
        assert!(matches!(apply(&op, &[1.0; 3]), Err(Error::Usage(_))));
    }

    #[test]
    fn apply_matches_dense_multiply() {
        let op = build_riesz_matrix(128, 0.5f64).unwrap();
        let v: Vec<f64> = (0..128).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let fast = apply(&op, &v).unwrap();
        let dense = op.to_dense() * nalgebra::DVector::from_vec(v);
        let scale = dense.abs().max();
        for (a, b) in fast.iter().zip(dense.iter()) {
            assert!((a - b).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn double_inverse_is_identity() {
        let op = build_riesz_matrix(50, 0.3f64).unwrap();
        let back = invert(&invert(&op, None).unwrap(), None).unwrap();
        for (a, b) in back.eigenvalues().iter().zip(op.eigenvalues()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn f32_operator() {
        let op = build_riesz_matrix(32, 0.5f32).unwrap();
        let inv = invert(&op, None).unwrap();
        let prod = op.compose(&inv).unwrap();
        assert!((prod.first_row()[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn periodic_zeta_examples() {
        let s = periodic_zeta_symbol(2.0f64, std::f64::consts::PI, 200_000).unwrap();
        let expected = -std::f64::consts::PI.powi(2) / 12.0;
        assert!((s - expected).abs() < 1e-9, "{s}");
        let a = periodic_zeta_symbol(0.5f64, 0.3, 1000).unwrap();
        let b = periodic_zeta_symbol(0.5f64, -0.3, 1000).unwrap();
        assert_eq!(a, b);
        assert!(matches!(periodic_zeta_symbol(0.5f64, 0.0, 10), Err(Error::Domain(_))));
        assert!(periodic_zeta_symbol(1.5f64, 0.0, 10).is_ok());
    }

    #[test]
    fn periodic_zeta_small_angle_slope() {
        let thetas = [1e-4f64, 3e-4, 1e-3, 3e-3, 1e-2];
        let xs: Vec<f64> = thetas.iter().map(|t| 1.0 / t).collect();
        let ys: Vec<f64> = thetas.iter().map(|&t| periodic_zeta_symbol(0.5, t, 16_000_000).unwrap()).collect();
        let f = fit_power_law(&xs, &ys, None, (100, 10_000)).unwrap();
        assert!((f.exponent - 0.5).abs() < 0.05, "{}", f.exponent);
    }

    #[test]
    fn sparse_inverse_k0_one_is_exact() {
        let a = build_sparse_approx_inverse(64, 0.5f64, 1).unwrap();
        let exact = invert(&build_riesz_matrix(64, 0.5f64).unwrap(), None).unwrap();
        for (x, y) in a.first_row().iter().zip(exact.first_row()) {
            assert!((x - y).abs() < 1e-14);
        }
        let r = approx_inverse_residual(64, 0.5, &a).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!(r[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sparse_inverse_positive_and_checked() {
        let a = build_sparse_approx_inverse(256, 0.5f64, 4).unwrap();
        assert!(a.min_eigenvalue() > 0.0);
        assert!(a.first_row().iter().enumerate().all(|(d, v)| d % 4 == 0 || *v == 0.0));
        assert!(matches!(build_sparse_approx_inverse(256, 0.5f64, 64), Err(Error::Degenerate(_))));
        assert!(matches!(build_sparse_approx_inverse(256, 0.5f64, 3), Err(Error::Degenerate(_))));
    }

    #[test]
    fn decay_window_checked() {
        let inv = invert(&build_riesz_matrix(256, 0.5f64).unwrap(), None).unwrap();
        assert!(inverse_row_decay(&inv, (2, 16)).is_err());
        assert!(inverse_row_decay(&inv, (4, 64)).is_err());
        assert!(inverse_row_decay(&inv, (4, 32)).is_ok());
    }

    #[test]
    fn csv_export() {
        let op = build_riesz_matrix(4, 1.0f64).unwrap();
        let mut buf = Vec::new();
        op.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "lag,row_value,eigenvalue");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("1,0.5,"));
    }

    proptest! {
        #[test]
        fn apply_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let n = 32;
            let op = build_riesz_matrix(n, 0.6f64).unwrap();
            let u: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
            let v: Vec<f64> = (0..n).map(|i| ((i as u64 * 13 + seed * 7) % 23) as f64 - 11.0).collect();
            let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = apply(&op, &w).unwrap();
            let au = apply(&op, &u).unwrap();
            let bv = apply(&op, &v).unwrap();
            let scale = lhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for i in 0..n {
                prop_assert!((lhs[i] - a * au[i] - b * bv[i]).abs() <= 1e-11 * scale);
            }
        }

        #[test]
        fn invert_then_apply_roundtrips(seed in 0u64..1000, si in 0usize..4) {
            let s = [0.3, 0.5, 0.7, 1.5][si];
            let n = 48;
            let op = build_riesz_matrix(n, s).unwrap();
            let inv = invert(&op, None).unwrap();
            let v: Vec<f64> = (0..n).map(|i| (((i as u64 + 1) * (seed + 3)) % 29) as f64 - 14.0).collect();
            let back = apply(&inv, &apply(&op, &v).unwrap()).unwrap();
            let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for i in 0..n {
                prop_assert!((back[i] - v[i]).abs() <= 1e-9 * scale);
            }
        }
    }
}
