//! Hurwitz zeta by Euler–Maclaurin summation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// B_{2j} / (2j)! for j = 1..=20.
const BERNOULLI_RATIO: [f64; 20] = [
    0.08333333333333333,
    -0.001388888888888889,
    3.306878306878307e-05,
    -8.267195767195768e-07,
    2.08767569878681e-08,
    -5.284190138687493e-10,
    1.3382536530684679e-11,
    -3.3896802963225827e-13,
    8.586062056277845e-15,
    -2.174868698558062e-16,
    5.5090028283602295e-18,
    -1.3954464685812522e-19,
    3.534707039629467e-21,
    -8.953517427037546e-23,
    2.267952452337683e-24,
    -5.744790668872202e-26,
    1.455172475614865e-27,
    -3.6859949406653103e-29,
    9.336734257095045e-31,
    -2.36502241570063e-32,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEvalOptions {
    /// Truncation n of the raw lattice series.
    pub series_cutoff: usize,
    /// Number of leading terms summed directly before the Euler–Maclaurin tail.
    pub em_shift: usize,
    /// Bernoulli correction terms.
    pub em_terms: usize,
    pub abs_tol: f64,
}

impl Default for KernelEvalOptions {
    fn default() -> Self {
        KernelEvalOptions { series_cutoff: 100_000, em_shift: 16, em_terms: 12, abs_tol: 1e-16 }
    }
}

impl KernelEvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.series_cutoff < 1 {
            return Err(Error::Usage("series_cutoff must be at least 1".into()));
        }
        if self.em_shift < 8 {
            return Err(Error::Usage("em_shift must be at least 8".into()));
        }
        if !(2..=20).contains(&self.em_terms) {
            return Err(Error::Usage("em_terms must lie in 2..=20".into()));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::Usage("abs_tol must be positive".into()));
        }
        Ok(())
    }
}

/// ζ(s, a) = Σ_{k≥0} (k + a)^{-s}, analytically continued in s.
pub fn hurwitz_zeta<T: Scalar>(s: T, a: T) -> Result<T> {
    hurwitz_zeta_with(s, a, &KernelEvalOptions::default())
}

pub fn hurwitz_zeta_with<T: Scalar>(s: T, a: T, opts: &KernelEvalOptions) -> Result<T> {
    if s == T::one() {
        return Err(Error::Pole);
    }
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::Domain(format!("zeta shift a = {a} must be positive")));
    }
    if !s.is_finite() {
        return Err(Error::Domain(format!("zeta exponent s = {s} is not finite")));
    }
    Ok(zeta_unchecked(s, a, opts))
}

pub(crate) fn zeta_unchecked<T: Scalar>(s: T, a: T, opts: &KernelEvalOptions) -> T {
    let m = opts.em_shift;
    let mut head = T::zero();
    // Largest terms last.
    for k in (0..m).rev() {
        head = head + (a + T::of_usize(k)).powf(-s);
    }
    let x = a + T::of_usize(m);
    let xs = x.powf(-s);
    let mut tail = x * xs / (s - T::one()) + xs / T::lit(2.0);
    // Rising factorial (s)_{2j-1} times x^{-s-2j+1}, updated two orders at a time.
    let inv_x = x.recip();
    let mut fac = s * xs * inv_x;
    let tol = T::lit(opts.abs_tol);
    for (j, &b) in BERNOULLI_RATIO.iter().enumerate().take(opts.em_terms) {
        let term = T::lit(b) * fac;
        tail = tail + term;
        if term.abs() <= tol * (head + tail).abs() {
            break;
        }
        let k = T::of_usize(2 * j + 1);
        fac = fac * (s + k) * (s + k + T::one()) * inv_x * inv_x;
    }
    head + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct summation with an integral tail and midpoint correction, plus
    /// Richardson extrapolation in the cutoff.
    fn brute(s: f64, a: f64, n: usize) -> f64 {
        let partial = |n: usize| -> f64 {
            let mut acc = 0.0;
            for k in (0..n).rev() {
                acc += (k as f64 + a).powf(-s);
            }
            let x = n as f64 + a;
            acc + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s)
        };
        let f1 = partial(n);
        let f2 = partial(2 * n);
        // Leading remaining error is O(n^{-s-1}).
        let r = 2f64.powf(s + 1.0);
        (r * f2 - f1) / (r - 1.0)
    }

    #[test]
    fn zeta_two_one() {
        let z = hurwitz_zeta(2.0f64, 1.0).unwrap();
        assert!((z - 1.6449340668482264).abs() < 1e-13, "{z}");
        assert!((brute(2.0, 1.0, 200_000) - z).abs() < 1e-12);
    }

    #[test]
    fn zeta_recurrence() {
        for &(s, a) in &[(0.5, 0.3), (1.5, 0.7), (2.5, 0.01), (-0.5, 0.4)] {
            let lhs: f64 = hurwitz_zeta(s, a).unwrap();
            let rhs = a.powf(-s) + hurwitz_zeta(s, a + 1.0).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{s} {a}");
        }
    }

    #[test]
    fn zeta_half_half_against_brute_force() {
        let z = hurwitz_zeta(0.5f64, 0.5).unwrap();
        let b = brute(0.5, 0.5, 100_000);
        assert!((z - b).abs() < 1e-10, "{z} vs {b}");
        // (2^{1/2} - 1) ζ(1/2) with ζ(1/2) = -1.4603545088095868
        assert!((z - (2f64.sqrt() - 1.0) * -1.4603545088095868).abs() < 1e-13);
    }

    #[test]
    fn zeta_various_against_brute_force() {
        for &s in &[0.3, 0.7, 1.2, 1.5, 2.5, 3.0] {
            for &a in &[0.05, 0.5, 1.0, 1.7] {
                let z: f64 = hurwitz_zeta(s, a).unwrap();
                let b = brute(s, a, 50_000);
                assert!((z - b).abs() < 1e-9 * z.abs().max(1.0), "s={s} a={a}: {z} vs {b}");
            }
        }
    }

    #[test]
    fn zeta_negative_exponent() {
        // ζ(-1, a) = -B_2(a)/2 = -(a² - a + 1/6)/2
        for &a in &[0.2, 0.5, 1.3] {
            let z: f64 = hurwitz_zeta(-1.0, a).unwrap();
            let exact = -(a * a - a + 1.0 / 6.0) / 2.0;
            assert!((z - exact).abs() < 1e-12, "{z} vs {exact}");
        }
    }

    #[test]
    fn zeta_f32() {
        let z = hurwitz_zeta(2.0f32, 1.0f32).unwrap();
        assert!((z - 1.644_934).abs() < 1e-5);
    }

    #[test]
    fn zeta_errors() {
        assert_eq!(hurwitz_zeta(1.0, 0.5), Err(Error::Pole));
        assert!(matches!(hurwitz_zeta(0.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(hurwitz_zeta(0.5, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn options_validate() {
        assert!(KernelEvalOptions::default().validate().is_ok());
        let bad = KernelEvalOptions { em_shift: 4, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = KernelEvalOptions { em_terms: 21, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
