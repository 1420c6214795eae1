//! Scalar abstraction for the numeric kernels.
//!
//! Limit-law evaluation, Bessel functions and quadrature are written against
//! [`Real`] so they work for `f32` and `f64`. Special functions come from
//! `libm` and `statrs`, are evaluated in `f64` and converted back.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub fn ln_gamma<T: Real>(x: T) -> T {
    T::c(libm::lgamma(x.f64()))
}

pub fn gamma<T: Real>(x: T) -> T {
    T::c(libm::tgamma(x.f64()))
}

pub fn erfc<T: Real>(x: T) -> T {
    T::c(libm::erfc(x.f64()))
}

/// Standard normal density.
pub fn normal_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_2pi = T::c(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(x * x) / T::c(2.0)).exp()
}

/// Standard normal distribution function, accurate in both tails.
pub fn normal_cdf<T: Real>(x: T) -> T {
    T::c(0.5) * erfc(-x / T::SQRT_2())
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn normal_sf<T: Real>(x: T) -> T {
    T::c(0.5) * erfc(x / T::SQRT_2())
}

/// Standard normal quantile: `erfc_inv` start, one Newton step against the
/// tail on the same side.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    let d = normal_pdf(x);
    if d == 0.0 {
        return x;
    }
    if p < 0.5 {
        x - (normal_cdf(x) - p) / d
    } else {
        x + (normal_sf(x) - (1.0 - p)) / d
    }
}

/// Upper regularized incomplete gamma `Q(a, x)`; chi-square survival uses it.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(a, x)
}

/// Survival function of the chi-square law with `dof` degrees of freedom.
pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    gamma_q(dof / 2.0, stat / 2.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_symmetry_and_reference() {
        assert!((normal_cdf(0.0_f64) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959_963_984_540_054_f64) - 0.975).abs() < 1e-14);
        assert!((normal_sf(8.0_f64) - 6.220_960_574_271_785e-16).abs() < 1e-28);
        assert!((normal_cdf(-1.3_f32) + normal_cdf(1.3_f32) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.01, 0.25, 0.5, 0.75, 0.975, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-13 * p.max(1e-3), "p={p}");
        }
    }

    #[test]
    fn chi2_survival_reference() {
        // chi2(1) upper 5% point
        assert!((chi2_sf(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-12);
        assert_eq!(chi2_sf(0.0, 4.0), 1.0);
    }
}
