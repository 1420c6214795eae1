//! Symmetric variance-gamma laws.
//!
//! `VG(alpha, theta, s, c)` here takes `s` as the scale appearing in the
//! density, `f(x) = |x-c|^nu K_nu(|x-c| / s) / (s sqrt(pi) Gamma(alpha/2) (2s)^nu)`
//! with `nu = (alpha - 1) / 2`. The law of `Q_n = sum W_i Z_i`, with all factors
//! `N(0, sigma^2)`, is `VG(n, 0, sigma^2, 0)` in this convention.

use crate::error::{Error, Result};
use crate::quadrature::{tanh_sinh, to_infinity, Tolerance};
use crate::scalar::{gamma, ln_gamma, Real};

use super::bessel::bessel_k;

fn check_params<T: Real>(alpha: T, theta: T, s: T) -> Result<()> {
    if theta != T::zero() {
        return Err(Error::Unsupported(
            "variance-gamma with nonzero theta: the skewness term is ambiguous, only theta = 0 is implemented".into(),
        ));
    }
    if !(s > T::zero()) || !s.is_finite() {
        return Err(Error::invalid(format!("variance-gamma scale must be > 0, got {s}")));
    }
    if !(alpha >= T::one()) || alpha.fract() != T::zero() {
        return Err(Error::Unsupported(format!(
            "variance-gamma shape must be a positive integer (Bessel order (alpha-1)/2), got {alpha}"
        )));
    }
    Ok(())
}

/// Density of `VG(alpha, theta, s, c)` at `x`.
///
/// At the center `x = c` the density is `+inf` for `alpha <= 1` and the finite
/// limit `Gamma(nu) / (2 s sqrt(pi) Gamma(alpha/2))` otherwise.
pub fn vg_pdf<T: Real>(alpha: T, theta: T, s: T, c: T, x: T) -> Result<T> {
    check_params(alpha, theta, s)?;
    let nu = (alpha - T::one()) / T::c(2.0);
    let y = (x - c).abs();
    let sqrt_pi = T::PI().sqrt();
    let center = || {
        if nu == T::zero() {
            T::infinity()
        } else {
            gamma(nu) / (T::c(2.0) * s * sqrt_pi * gamma(alpha / T::c(2.0)))
        }
    };
    if y == T::zero() {
        return Ok(center());
    }
    let k = bessel_k(nu, y / s)?;
    if k.is_infinite() {
        // y^nu K_nu(y/s) has reached its limit long before K_nu overflows
        return Ok(center());
    }
    if k == T::zero() {
        return Ok(T::zero());
    }
    // log-space prefactor keeps large orders from overflowing
    let log_pref = -(s.ln() + sqrt_pi.ln() + ln_gamma(alpha / T::c(2.0))) + nu * (y / (T::c(2.0) * s)).ln();
    Ok(log_pref.exp() * k)
}

/// Distribution function of the symmetric `VG(alpha, 0, s, c)` law.
pub fn vg_cdf<T: Real>(alpha: T, s: T, c: T, x: T) -> Result<T> {
    check_params(alpha, T::zero(), s)?;
    let y = (x - c).abs();
    let half = T::c(0.5);
    if y == T::zero() {
        return Ok(half);
    }
    let density = |t: T| vg_pdf(alpha, T::zero(), s, T::zero(), t).unwrap_or(T::zero());
    let tol = Tolerance::new(1e-14, 1e-12);
    // Inner mass for small |x|, upper tail otherwise.
    let upper = if y <= s {
        half - tanh_sinh(density, T::zero(), y, tol)?.value
    } else {
        to_infinity(density, y, tol)?.value
    };
    let upper = upper.max(T::zero());
    Ok(if x > c { T::one() - upper } else { upper })
}

/// Characteristic function of `Q_n`: `(1 + s^4 t^2)^{-n/2}`.
pub fn vg_cf<T: Real>(n: u32, s: T, t: T) -> T {
    let s2 = s * s;
    (T::one() + s2 * s2 * t * t).powf(-T::from_u32(n).unwrap() / T::c(2.0))
}

/// Mean and variance of `Q_n`: `(0, n s^4)`.
pub fn vg_moments<T: Real>(n: u32, s: T) -> (T, T) {
    let s2 = s * s;
    (T::zero(), T::from_u32(n).unwrap() * s2 * s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_laws::bessel::bessel_k;

    #[test]
    fn product_of_normals_reduces_to_k0() {
        // VG(1,0,1,0): f(x) = K_0(|x|) / pi
        let got: f64 = vg_pdf(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((got - 0.134_016_241_016_994_27).abs() < 1e-12);
        let k0 = bessel_k(0.0, 2.5).unwrap();
        assert!((vg_pdf(1.0, 0.0, 1.0, 0.0, -2.5).unwrap() - k0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn laplace_case() {
        assert!((vg_pdf(2.0_f64, 0.0, 1.0, 0.0, 0.0).unwrap() - 0.5).abs() < 1e-14);
        for &x in &[-3.0, -0.7, 0.2, 1.0, 5.0] {
            let want = 0.5 * (-(x as f64).abs()).exp();
            assert!((vg_pdf(2.0, 0.0, 1.0, 0.0, x).unwrap() - want).abs() < 1e-14, "x={x}");
        }
    }

    #[test]
    fn multiprecision_references() {
        let cases = [
            (2.0, 1.0, 0.7, 0.248_292_651_895_704_77),
            (3.0, 2.0, 1.5, 0.113_347_818_885_401_12),
            (5.0, 0.5, -0.3, 0.391_162_505_573_007_45),
        ];
        for (a, s, x, want) in cases {
            let got: f64 = vg_pdf(a, 0.0, s, 0.0, x).unwrap();
            assert!(((got - want) / want).abs() < 1e-11, "a={a} s={s} x={x}: {got}");
        }
    }

    #[test]
    fn center_singularity() {
        assert!(vg_pdf(1.0_f64, 0.0, 1.0, 0.3, 0.3).unwrap().is_infinite());
        // alpha = 3: Gamma(1) / (2 sqrt(pi) Gamma(3/2)) = 1/pi
        let v: f64 = vg_pdf(3.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!((v - 1.0 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn symmetric_about_center() {
        for &x in &[0.25, 0.75, 3.5] {
            let a = vg_pdf(3.0, 0.0, 0.5, 1.0, 1.0 + x).unwrap();
            let b = vg_pdf(3.0, 0.0, 0.5, 1.0, 1.0 - x).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn integrates_to_one() {
        for &alpha in &[1.0, 2.0, 3.0, 5.0] {
            for &s in &[0.5, 1.0, 2.0] {
                let half = to_infinity(
                    |t: f64| vg_pdf(alpha, 0.0, s, 0.0, t).unwrap(),
                    0.0,
                    Tolerance::new(1e-12, 1e-12),
                )
                .unwrap();
                assert!((2.0 * half.value - 1.0).abs() < 1e-8, "alpha={alpha} s={s}: {}", 2.0 * half.value);
            }
        }
    }

    #[test]
    fn cdf_matches_laplace_closed_form() {
        for &x in &[-4.0_f64, -1.0, -0.2, 0.0, 0.5, 2.0, 9.0] {
            let want = if x < 0.0 { 0.5 * x.exp() } else { 1.0 - 0.5 * (-x).exp() };
            assert!((vg_cdf(2.0, 1.0, 0.0, x).unwrap() - want).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn cf_and_moments() {
        assert_eq!(vg_cf(2, 1.0, 1.0), 0.5);
        assert_eq!(vg_cf(5, 1.3, 0.0), 1.0);
        assert_eq!(vg_moments(3, 1.0), (0.0, 3.0));
        assert!((vg_moments(2, 2.0_f64).1 - 32.0).abs() < 1e-15);
    }

    #[test]
    fn nonzero_theta_unsupported() {
        assert!(matches!(vg_pdf(2.0, 0.1, 1.0, 0.0, 1.0), Err(Error::Unsupported(_))));
    }
}
