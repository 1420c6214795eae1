//! Density and distribution function from a real (symmetric-law)
//! characteristic function, by Gil-Pelaez inversion:
//!
//! `f(x) = (1/pi) int_0^inf cos(t x) phi(t) dt`,
//! `F(x) = 1/2 + (1/pi) int_0^inf sin(t x) phi(t) / t dt`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{fourier_half_line, Kernel, Tolerance};
use crate::scalar::Real;

use super::{Grid, LawTable};

/// Negative density values above this are clipped to zero.
pub const PDF_CLIP: f64 = 1e-12;
/// Largest monotonicity repair accepted on a tabulated distribution function.
pub const CDF_REPAIR_LIMIT: f64 = 1e-9;

const INVERSION_TOL: Tolerance = Tolerance::new(1e-12, 1e-11);

/// Rejects characteristic functions that do not decay (atoms, degenerate laws).
pub fn check_decay<T: Real, C: Fn(T) -> T>(cf: &C) -> Result<()> {
    let worst = [1e3, 2.5e3, 5e3, 1e4]
        .iter()
        .map(|&t| cf(T::c(t)).abs())
        .fold(T::zero(), |a, b| a.max(b));
    if !(worst < T::c(1e-2)) {
        return Err(Error::invalid(format!(
            "characteristic function does not decay (|phi(t)| = {worst} at large t): law has an atom and no density"
        )));
    }
    Ok(())
}

/// Density at one point. Returns `+inf` where the inversion integral diverges.
pub fn pdf_at<T: Real, C: Fn(T) -> T>(cf: &C, x: T) -> Result<T> {
    let v = fourier_half_line(cf, x, Kernel::Cos, INVERSION_TOL)?.value / T::PI();
    if v.is_infinite() {
        return Ok(v);
    }
    if v < -T::c(PDF_CLIP) {
        return Err(Error::Quadrature {
            context: format!("inverted density negative at x = {x}"),
            residual: v.f64(),
        });
    }
    Ok(v.max(T::zero()))
}

/// Distribution function at one point.
pub fn cdf_at<T: Real, C: Fn(T) -> T>(cf: &C, x: T) -> Result<T> {
    let g = |t: T| cf(t) / t;
    let v = T::c(0.5) + fourier_half_line(g, x, Kernel::Sin, INVERSION_TOL)?.value / T::PI();
    Ok(v.max(T::zero()).min(T::one()))
}

/// Tabulates pdf and cdf on `grid` from a real characteristic function.
///
/// Density values in `(-1e-12, 0)` are clipped to zero; the distribution
/// function is made nondecreasing by a running maximum whose largest
/// correction is stored in [`LawTable::monotone_repair`] and must stay below
/// `1e-9`.
pub fn cf_invert<T: Real, C: Fn(T) -> T + Sync>(cf: C, grid: &Grid<T>) -> Result<LawTable<T>> {
    check_decay(&cf)?;
    let xs = grid.points()?;
    let rows: Vec<(T, T)> = xs
        .par_iter()
        .map(|&x| Ok((pdf_at(&cf, x)?, cdf_at(&cf, x)?)))
        .collect::<Result<Vec<_>>>()?;
    let (pdf, raw_cdf): (Vec<T>, Vec<T>) = rows.into_iter().unzip();
    LawTable::from_raw(xs, pdf, raw_cdf)
}

pub(super) fn repair_monotone<T: Real>(cdf: &mut [T]) -> Result<T> {
    let mut repair = T::zero();
    for i in 1..cdf.len() {
        if cdf[i] < cdf[i - 1] {
            repair = repair.max(cdf[i - 1] - cdf[i]);
            cdf[i] = cdf[i - 1];
        }
    }
    if repair > T::c(CDF_REPAIR_LIMIT) {
        return Err(Error::Quadrature {
            context: "tabulated cdf not monotone".into(),
            residual: repair.f64(),
        });
    }
    if repair > T::zero() {
        log::debug!("cdf monotonicity repair of {:e}", repair.f64());
    }
    Ok(repair)
}
