//! Modified Bessel function of the second kind for integer and half-integer
//! orders.

use crate::error::{Error, Result};
use crate::scalar::Real;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `K_nu(x)` for `2 * nu` a non-negative integer and `x > 0`.
///
/// Half-integer orders use the terminating closed form. Integer orders start
/// from `K_0`, `K_1` (power series for `x <= 2`, Steed's continued fraction
/// above) and climb with the forward recurrence, which is stable for `K`.
pub fn bessel_k<T: Real>(nu: T, x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::invalid(format!("bessel_k requires finite x > 0, got {x}")));
    }
    let twice = nu * T::c(2.0);
    if nu < T::zero() || twice.fract() != T::zero() {
        return Err(Error::Unsupported(format!(
            "bessel_k supports integer and half-integer orders >= 0, got {nu}"
        )));
    }
    let twice = twice.to_usize().expect("order fits usize");
    if twice % 2 == 1 {
        Ok(half_integer(twice / 2, x))
    } else {
        Ok(integer(twice / 2, x))
    }
}

/// `K_{n + 1/2}(x) = sqrt(pi / 2x) e^{-x} sum_k (n+k)! / (k! (n-k)!) (2x)^{-k}`.
fn half_integer<T: Real>(n: usize, x: T) -> T {
    let two_x = x * T::c(2.0);
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..=n {
        let kf = T::from_usize_lossy(k);
        term = term * T::from_usize_lossy(n + k) * T::from_usize_lossy(n + 1 - k) / (kf * two_x);
        sum = sum + term;
    }
    (T::PI() / two_x).sqrt() * (-x).exp() * sum
}

fn integer<T: Real>(n: usize, x: T) -> T {
    let (k0, k1) = if x <= T::c(2.0) { k01_series(x) } else { k01_steed(x) };
    match n {
        0 => k0,
        1 => k1,
        _ => {
            let mut prev = k0;
            let mut cur = k1;
            for k in 1..n {
                let next = prev + T::c(2.0) * T::from_usize_lossy(k) / x * cur;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Power series for small arguments; `K_1` from the Wronskian
/// `I_0 K_1 + I_1 K_0 = 1 / x`.
fn k01_series<T: Real>(x: T) -> (T, T) {
    let q = x * x / T::c(4.0);
    let mut term = T::one(); // q^k / (k!)^2
    let mut i0 = T::one();
    let mut i1_core = T::one(); // sum q^k / (k! (k+1)!)
    let mut harmonic = T::zero();
    let mut tail = T::zero();
    let mut k = 1usize;
    loop {
        let kf = T::from_usize_lossy(k);
        term = term * q / (kf * kf);
        harmonic = harmonic + T::one() / kf;
        i0 = i0 + term;
        i1_core = i1_core + term / (kf + T::one());
        let contrib = term * harmonic;
        tail = tail + contrib;
        if contrib <= T::epsilon() * tail.abs() * T::c(0.1) && term <= T::epsilon() * i0 * T::c(0.1) {
            break;
        }
        k += 1;
        if k > 200 {
            break;
        }
    }
    let i1 = x / T::c(2.0) * i1_core;
    let k0 = -((x / T::c(2.0)).ln() + T::c(EULER_GAMMA)) * i0 + tail;
    let k1 = (T::one() / x - i1 * k0) / i0;
    (k0, k1)
}

/// Steed's continued-fraction method (order 0) for `x > 2`.
fn k01_steed<T: Real>(x: T) -> (T, T) {
    let two = T::c(2.0);
    let mut b = two * (T::one() + x);
    let mut d = T::one() / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = T::zero();
    let mut q2 = T::one();
    let a1 = T::c(0.25);
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = T::one() + q * delh;
    for i in 2..10_000usize {
        let fi = T::from_usize_lossy(i);
        a = a - two * T::from_usize_lossy(i - 1);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q = q + c * qnew;
        b = b + two;
        d = T::one() / (b + a * d);
        delh = (b * d - T::one()) * delh;
        h = h + delh;
        let dels = q * delh;
        s = s + dels;
        if (dels / s).abs() < T::epsilon() * T::c(0.5) {
            break;
        }
    }
    h = a1 * h;
    let k0 = (T::PI() / (two * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + T::c(0.5) - h) / x;
    (k0, k1)
}
