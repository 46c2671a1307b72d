//! The periodic Riesz kernel g_s(x) = ζ(s, x) + ζ(s, 1 - x) and its derivatives.

mod tabulated;
mod zeta;

pub use tabulated::TabulatedKernel;
pub use zeta::{hurwitz_zeta, hurwitz_zeta_with, KernelEvalOptions};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use zeta::zeta_unchecked;

/// Below this distance from the singularity the kernel loses relative accuracy.
pub const NEAR_SINGULAR: f64 = 1e-12;

/// How the endpoint terms k = ±n of the truncated lattice series are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeriesEndpoint {
    /// Every term with |k| ≤ n has weight one.
    #[default]
    Full,
    /// Trapezoidal weights 1/2 on k = ±n.
    HalfWeight,
}

fn check_s<T: Scalar>(s: T) -> Result<()> {
    if !(s > T::zero()) || s == T::one() || !s.is_finite() {
        return Err(Error::Domain(format!("kernel exponent s = {s} must be positive and != 1")));
    }
    Ok(())
}

fn check_x<T: Scalar>(x: T) -> Result<()> {
    if !(x > T::zero() && x < T::one()) {
        return Err(Error::Domain(format!("x = {x} must lie in the open interval (0, 1)")));
    }
    let near = T::lit(NEAR_SINGULAR);
    if x < near || T::one() - x < near {
        log::warn!("riesz kernel evaluated at x = {x}, within {NEAR_SINGULAR:e} of the singularity");
    }
    Ok(())
}

pub fn riesz_kernel<T: Scalar>(s: T, x: T) -> Result<T> {
    riesz_kernel_with(s, x, &KernelEvalOptions::default())
}

pub fn riesz_kernel_with<T: Scalar>(s: T, x: T, opts: &KernelEvalOptions) -> Result<T> {
    check_s(s)?;
    check_x(x)?;
    Ok(zeta_unchecked(s, x, opts) + zeta_unchecked(s, T::one() - x, opts))
}

/// Truncated lattice sum Σ_{|k|≤n} |x + k|^{-s}, minus (2/(1-s)) n^{1-s} when s < 1.
pub fn riesz_kernel_series<T: Scalar>(s: T, x: T, n: usize) -> Result<T> {
    riesz_kernel_series_with(s, x, n, SeriesEndpoint::Full)
}

pub fn riesz_kernel_series_with<T: Scalar>(s: T, x: T, n: usize, endpoint: SeriesEndpoint) -> Result<T> {
    check_s(s)?;
    check_x(x)?;
    if n < 1 {
        return Err(Error::Usage("series cutoff must be at least 1".into()));
    }
    // k and -k pair up as (k + x)^{-s} + (k - x)^{-s}; sum from the small end last.
    let mut acc = T::zero();
    let mut comp = T::zero();
    let half = T::lit(0.5);
    for k in (1..=n).rev() {
        let kf = T::of_usize(k);
        let mut term = (kf + x).powf(-s) + (kf - x).powf(-s);
        if k == n && endpoint == SeriesEndpoint::HalfWeight {
            term = term * half;
        }
        let y = term - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    acc = acc + x.powf(-s);
    if s < T::one() {
        let nf = T::of_usize(n);
        acc = acc - T::lit(2.0) / (T::one() - s) * nf.powf(T::one() - s);
    }
    Ok(acc)
}

/// p-th derivative, p ∈ {1, 2, 3}:
/// g^{(p)}(x) = (-1)^p (s)_p [ζ(s+p, x) + (-1)^p ζ(s+p, 1-x)].
pub fn riesz_kernel_deriv<T: Scalar>(s: T, x: T, p: u32) -> Result<T> {
    riesz_kernel_deriv_with(s, x, p, &KernelEvalOptions::default())
}

pub fn riesz_kernel_deriv_with<T: Scalar>(s: T, x: T, p: u32, opts: &KernelEvalOptions) -> Result<T> {
    if !(1..=3).contains(&p) {
        return Err(Error::Usage(format!("derivative order {p} unsupported (1..=3)")));
    }
    check_s(s)?;
    check_x(x)?;
    let mut rising = T::one();
    for k in 0..p {
        rising = rising * (s + T::of_usize(k as usize));
    }
    let sp = s + T::of_usize(p as usize);
    let left = zeta_unchecked(sp, x, opts);
    let right = zeta_unchecked(sp, T::one() - x, opts);
    Ok(if p % 2 == 0 { rising * (left + right) } else { -rising * (left - right) })
}

/// Antiderivative of g_s on [0, 1): G(x) = [ζ(s-1, 1-x) - ζ(s-1, x)] / (s - 1),
/// which vanishes at 0 because ζ(s-1, x) → ζ(s-1, 1) there. Only for s < 1.
pub fn riesz_kernel_antiderivative<T: Scalar>(s: T, x: T) -> Result<T> {
    check_s(s)?;
    if s > T::one() {
        return Err(Error::Domain("antiderivative needs an integrable singularity (s < 1)".into()));
    }
    let opts = KernelEvalOptions::default();
    let sm1 = s - T::one();
    if x == T::zero() {
        return Ok(T::zero());
    }
    if !(x > T::zero() && x < T::one()) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1)")));
    }
    let a = zeta_unchecked(sm1, T::one() - x, &opts);
    let b = zeta_unchecked(sm1, x, &opts);
    Ok((a - b) / sm1)
}

/// Averages of g_s over the cells [j/n - 1/(2n), j/n + 1/(2n)], j = 0..n.
/// Only defined for s < 1, where the singularity is integrable.
pub fn riesz_kernel_cell_averages<T: Scalar>(s: T, n: usize) -> Result<Vec<T>> {
    check_s(s)?;
    if s > T::one() {
        return Err(Error::Domain("cell averages need an integrable singularity (s < 1)".into()));
    }
    if n < 2 {
        return Err(Error::Usage("need at least two cells".into()));
    }
    let nf = T::of_usize(n);
    let h = nf.recip();
    let mut edges = Vec::with_capacity(n + 1);
    for j in 0..n {
        let e = (T::of_usize(2 * j) + T::one()) / (T::lit(2.0) * nf);
        edges.push(riesz_kernel_antiderivative(s, e)?);
    }
    let mut out = Vec::with_capacity(n);
    // Cell 0 straddles the singularity; by evenness it is twice [0, h/2].
    out.push(T::lit(2.0) * edges[0] / h);
    for j in 1..n {
        out.push((edges[j] - edges[j - 1]) / h);
    }
    Ok(out)
}
