//! One-dimensional quadrature used by the margin moments, the variance-gamma
//! normalisation checks and characteristic-function inversion.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Integral value together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

/// Absolute / relative tolerance pair.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn accept<T: Real>(&self, value: T, error: T) -> bool {
        error.f64() <= self.abs.max(self.rel * value.f64().abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-12)
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single 7/15-point Gauss-Kronrod panel.
fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Estimate<T> {
    let half = (b - a) / T::c(2.0);
    let center = (a + b) / T::c(2.0);
    let fc = f(center);
    let mut kronrod = fc * T::c(WGK[7]);
    let mut gauss = fc * T::c(WG[3]);
    for j in 0..7 {
        let dx = half * T::c(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * T::c(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::c(WG[j / 2]);
        }
    }
    Estimate {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Globally adaptive Gauss-Kronrod integration over a finite interval.
pub fn gauss_kronrod<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    tol: Tolerance,
) -> Result<Estimate<T>> {
    const MAX_PANELS: usize = 4000;
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: T::zero(),
        });
    }
    let mut panels: Vec<(T, T, Estimate<T>)> = vec![(a, b, gk15(&f, a, b))];
    loop {
        let total = panels
            .iter()
            .fold(T::zero(), |acc, p| acc + p.2.value);
        let err = panels.iter().fold(T::zero(), |acc, p| acc + p.2.error);
        if !total.is_finite() {
            return Err(Error::Numeric("non-finite integrand value".into()));
        }
        if tol.accept(total, err) {
            return Ok(Estimate { value: total, error: err });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                context: "gauss-kronrod panel limit".into(),
                residual: err.f64(),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.partial_cmp(&y.1 .2.error).unwrap())
            .expect("at least one panel");
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = (lo + hi) / T::c(2.0);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature {
                context: "gauss-kronrod interval underflow".into(),
                residual: err.f64(),
            });
        }
        panels.push((lo, mid, gk15(&f, lo, mid)));
        panels.push((mid, hi, gk15(&f, mid, hi)));
    }
}

/// Tanh-sinh kernel. The integrand receives the abscissa together with its
/// distances to the left and right endpoints so that endpoint singularities
/// and change-of-variable Jacobians can be evaluated without cancellation.
fn tanh_sinh_core<T: Real, F: Fn(T, T, T) -> T>(f: F, a: T, b: T, tol: Tolerance) -> Result<Estimate<T>> {
    const MAX_LEVEL: u32 = 12;
    let half = (b - a) / T::c(2.0);
    let center = (a + b) / T::c(2.0);
    let pi_2 = T::FRAC_PI_2();
    let tiny = T::min_positive_value();

    // Sum of weighted function values at t = k*h for the given k sequence.
    let node_sum = |h: T, start: usize, stride: usize| -> T {
        let mut acc = T::zero();
        let mut k = start;
        loop {
            let t = h * T::from_usize_lossy(k);
            let s = pi_2 * t.sinh();
            let cs = s.cosh();
            // 1 - tanh(s), computed without cancellation.
            let comp = (-s).exp() / cs;
            let dist = half * comp;
            let w = pi_2 * t.cosh() / (cs * cs);
            let left_ok = a + dist > a;
            let right_ok = b - dist < b;
            if dist <= tiny || !w.is_finite() || w <= tiny || !(left_ok || right_ok) {
                break;
            }
            // a node that rounds onto an endpoint is dropped on that side only
            let span = b - a;
            let left = if left_ok { f(a + dist, dist, span - dist) } else { T::zero() };
            let right = if right_ok { f(b - dist, span - dist, dist) } else { T::zero() };
            let term = w * (left + right);
            acc = acc + term;
            if k > 8 && (term.abs() * half) <= T::epsilon() * T::c(1e-3) * acc.abs().max(tiny) {
                break;
            }
            k += stride;
        }
        acc
    };

    let mut h = T::one();
    let mut sum = pi_2 * f(center, half, half) + node_sum(h, 1, 1);
    let mut estimate = sum * h * half;
    let mut last_err = T::infinity();
    for _ in 1..=MAX_LEVEL {
        h = h / T::c(2.0);
        sum = sum + node_sum(h, 1, 2);
        let next = sum * h * half;
        let err = (next - estimate).abs();
        estimate = next;
        last_err = err;
        if !estimate.is_finite() {
            return Err(Error::Numeric("tanh-sinh: non-finite integrand".into()));
        }
        if tol.accept(estimate, err) {
            return Ok(Estimate { value: estimate, error: err });
        }
    }
    Err(Error::Quadrature {
        context: "tanh-sinh level limit".into(),
        residual: last_err.f64(),
    })
}

/// Tanh-sinh (double exponential) quadrature on `[a, b]`; tolerates
/// integrable endpoint singularities. The integrand is never evaluated at the
/// endpoints themselves.
pub fn tanh_sinh<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: Tolerance) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate { value: T::zero(), error: T::zero() });
    }
    tanh_sinh_core(|x, _, _| f(x), a, b, tol)
}

/// Integral of `f` over `[a, inf)` via `t = a + u / (1 - u)`.
pub fn to_infinity<T: Real, F: Fn(T) -> T>(f: F, a: T, tol: Tolerance) -> Result<Estimate<T>> {
    tanh_sinh_core(
        |u, _, one_minus_u| {
            let t = a + u / one_minus_u;
            if !t.is_finite() {
                return T::zero();
            }
            let v = f(t);
            if v == T::zero() {
                T::zero()
            } else {
                v / one_minus_u / one_minus_u
            }
        },
        T::zero(),
        T::one(),
        tol,
    )
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums. Returns the
/// extrapolated limit and the change against the previous extrapolation.
pub fn wynn_epsilon<T: Real>(partial: &[T]) -> (T, T) {
    let n = partial.len();
    if n < 3 {
        let last = *partial.last().unwrap_or(&T::zero());
        return (last, T::infinity());
    }
    // prev = column k-1, cur = column k
    let mut prev: Vec<T> = vec![T::zero(); n + 1];
    let mut cur: Vec<T> = partial.to_vec();
    let mut best = cur[n - 1];
    let mut best_prev = cur[n - 2];
    let mut k = 0usize;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == T::zero() {
                // exact convergence in this column
                return (cur[i + 1], T::zero());
            }
            next.push(prev[i + 1] + T::one() / diff);
        }
        prev = cur;
        cur = next;
        k += 1;
        if k % 2 == 0 && !cur.is_empty() {
            let last = cur[cur.len() - 1];
            if !last.is_finite() {
                break;
            }
            best_prev = if cur.len() > 1 { cur[cur.len() - 2] } else { best };
            best = last;
        }
    }
    (best, (best - best_prev).abs())
}

/// Which trigonometric kernel an oscillatory integral carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Cos,
    Sin,
}

/// `int_0^inf g(t) cos(x t) dt` or `int_0^inf g(t) sin(x t) dt` for a
/// decaying `g`. The half-line is cut at the zeros of the kernel and the
/// resulting alternating partial sums are accelerated with Wynn's epsilon
/// algorithm. A non-oscillatory (`x == 0`) cosine integral that does not
/// converge yields `+inf`.
pub fn fourier_half_line<T: Real, G: Fn(T) -> T>(g: G, x: T, kernel: Kernel, tol: Tolerance) -> Result<Estimate<T>> {
    const MAX_SEGMENTS: usize = 2000;
    let x_abs = x.abs();
    let sign = if kernel == Kernel::Sin && x < T::zero() { -T::one() } else { T::one() };
    let seg_tol = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-2);

    if x_abs == T::zero() {
        if kernel == Kernel::Sin {
            return Ok(Estimate { value: T::zero(), error: T::zero() });
        }
        // Doubling windows; a 1/t tail shows up as a constant increment.
        let mut total = gauss_kronrod(&g, T::zero(), T::one(), seg_tol)?.value;
        let mut lo = T::one();
        for _ in 0..80 {
            let inc = gauss_kronrod(&g, lo, lo * T::c(2.0), seg_tol)?.value;
            total = total + inc;
            lo = lo * T::c(2.0);
            if inc.abs() <= T::c(tol.abs * 1e-2) {
                return Ok(Estimate { value: total, error: inc.abs() });
            }
        }
        return Ok(Estimate { value: T::infinity(), error: T::infinity() });
    }

    let integrand = |t: T| {
        let w = match kernel {
            Kernel::Cos => (x_abs * t).cos(),
            Kernel::Sin => (x_abs * t).sin(),
        };
        g(t) * w
    };
    let period = T::PI() / x_abs;
    let first_zero = match kernel {
        Kernel::Cos => period / T::c(2.0),
        Kernel::Sin => period,
    };

    // First segment, cut geometrically so narrow features near 0 are resolved.
    let mut head = T::zero();
    let mut lo = T::zero();
    let mut hi = T::one().min(first_zero);
    loop {
        head = head + gauss_kronrod(&integrand, lo, hi, seg_tol)?.value;
        if hi >= first_zero {
            break;
        }
        lo = hi;
        hi = (hi * T::c(2.0)).min(first_zero);
    }

    let mut partial = vec![head];
    let mut start = first_zero;
    let mut last_extrap = head;
    let mut stable = 0;
    for _ in 0..MAX_SEGMENTS {
        let end = start + period;
        let term = gauss_kronrod(&integrand, start, end, seg_tol)?.value;
        let sum = *partial.last().unwrap() + term;
        partial.push(sum);
        start = end;
        if term.abs() <= T::c(tol.abs * 1e-3) {
            return Ok(Estimate { value: sign * sum, error: term.abs() });
        }
        // Keep the epsilon table short; only the recent tail matters.
        let window = if partial.len() > 40 { &partial[partial.len() - 40..] } else { &partial[..] };
        let (extrap, _) = wynn_epsilon(window);
        let change = (extrap - last_extrap).abs();
        last_extrap = extrap;
        if partial.len() > 4 && tol.accept(extrap, change) {
            stable += 1;
            if stable >= 3 {
                return Ok(Estimate { value: sign * extrap, error: change });
            }
        } else {
            stable = 0;
        }
    }
    Err(Error::Quadrature {
        context: "oscillatory tail did not converge".into(),
        residual: (last_extrap - *partial.last().unwrap()).abs().f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_and_exp() {
        let r = gauss_kronrod(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - 0.0).abs() < 1e-13);
        let r = gauss_kronrod(|x: f64| x.exp(), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((r.value - (std::f64::consts::E - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        // int_0^1 -ln(x) dx = 1 ; int_0^1 x^{-1/2} dx = 2
        let r = tanh_sinh(|x: f64| -x.ln(), 0.0, 1.0, Tolerance::new(1e-13, 1e-13)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12, "{r:?}");
        let r = tanh_sinh(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn half_line_gaussian() {
        let r = to_infinity(|t: f64| (-t * t / 2.0).exp(), 0.0, Tolerance::default()).unwrap();
        assert!((r.value - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wynn_accelerates_alternating_harmonic() {
        let mut partial = Vec::new();
        let mut s = 0.0_f64;
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            partial.push(s);
        }
        let (v, _) = wynn_epsilon(&partial);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12, "{v}");
    }

    #[test]
    fn fourier_cos_of_slow_decay() {
        // int_0^inf cos(xt)/sqrt(1+t^2) dt = K_0(x)
        let x = 1.0_f64;
        let r = fourier_half_line(|t: f64| 1.0 / (1.0 + t * t).sqrt(), x, Kernel::Cos, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((r.value - 0.421_024_438_240_708_3).abs() < 1e-10, "{r:?}");
        // int_0^inf sin(xt)/t e^{-t} dt = atan(x)
        let r = fourier_half_line(|t: f64| (-t).exp() / t, -2.0, Kernel::Sin, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((r.value + 2.0_f64.atan()).abs() < 1e-11, "{r:?}");
    }

    #[test]
    fn fourier_divergent_at_zero_is_infinite() {
        let r = fourier_half_line(|t: f64| 1.0 / (1.0 + t * t).sqrt(), 0.0, Kernel::Cos, Tolerance::default()).unwrap();
        assert!(r.value.is_infinite());
    }
}
