//! Limiting laws of the standardized sample mean: Gaussian, standardized
//! variance-gamma, the composite bipartite limit `sqrt(1-r^2) Z + r Y` and the
//! two-hub Gaussian scale mixture, plus the law of `Q_n = sum W_i Z_i`.

pub mod bessel;
pub mod cf_invert;
pub mod vg;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{normal_cdf, normal_pdf, Real};

pub use bessel::bessel_k;
pub use cf_invert::cf_invert;
pub use vg::{vg_cdf, vg_cf, vg_moments, vg_pdf};

/// Evaluation grid `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub lo: T,
    pub hi: T,
    pub step: T,
}

impl<T: Real> Grid<T> {
    pub fn new(lo: T, hi: T, step: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || !(step > T::zero()) || !(hi >= lo) {
            return Err(Error::invalid(format!("bad grid {lo}:{hi}:{step}")));
        }
        Ok(Self { lo, hi, step })
    }

    /// Parses `lo:hi:step`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("grid must be lo:hi:step, got {spec:?}")));
        }
        let num = |s: &str| -> Result<T> {
            s.trim()
                .parse::<f64>()
                .map(T::c)
                .map_err(|_| Error::invalid(format!("bad number {s:?} in grid")))
        };
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + T::c(1e-9)).floor().to_usize().unwrap_or(0) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Result<Vec<T>> {
        let n = self.len();
        if n > 50_000_000 {
            return Err(Error::invalid("grid has too many points"));
        }
        Ok((0..n).map(|i| self.lo + self.step * T::from_usize_lossy(i)).collect())
    }
}

/// Tabulated density and distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct LawTable<T> {
    pub x: Vec<T>,
    pub pdf: Vec<T>,
    pub cdf: Vec<T>,
    /// Largest correction applied to keep `cdf` nondecreasing.
    pub monotone_repair: T,
}

impl<T: Real> LawTable<T> {
    pub(crate) fn from_raw(x: Vec<T>, pdf: Vec<T>, mut cdf: Vec<T>) -> Result<Self> {
        let monotone_repair = cf_invert::repair_monotone(&mut cdf)?;
        Ok(Self { x, pdf, cdf, monotone_repair })
    }

    /// Linear interpolation of the tabulated cdf; 0 / 1 outside the grid.
    pub fn cdf_interp(&self, x: T) -> T {
        let n = self.x.len();
        if n == 0 || x < self.x[0] {
            return T::zero();
        }
        if x >= self.x[n - 1] {
            return if x == self.x[n - 1] { self.cdf[n - 1] } else { T::one() };
        }
        let i = self.x.partition_point(|&v| v <= x) - 1;
        let w = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.cdf[i] + w * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Cubic Hermite interpolation of the cdf using the tabulated density as
    /// slope, clamped to the cell; linear in cells touching an infinite
    /// density. 0 / 1 outside the grid.
    pub fn cdf_hermite(&self, x: T) -> T {
        let n = self.x.len();
        if n < 2 || x < self.x[0] || x >= self.x[n - 1] {
            return self.cdf_interp(x);
        }
        let i = self.x.partition_point(|&v| v <= x) - 1;
        let (f0, f1) = (self.pdf[i], self.pdf[i + 1]);
        if !(f0.is_finite() && f1.is_finite()) {
            return self.cdf_interp(x);
        }
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let one = T::one();
        let two = T::c(2.0);
        let three = T::c(3.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (two * t3 - three * t2 + one) * c0
            + (t3 - two * t2 + t) * h * f0
            + (three * t2 - two * t3) * c1
            + (t3 - t2) * h * f1;
        v.max(c0).min(c1)
    }

    /// Composite Simpson (trapezoid on a trailing odd panel) integral of the
    /// density table. Infinite entries are skipped.
    pub fn pdf_mass(&self) -> T {
        let n = self.x.len();
        if n < 2 {
            return T::zero();
        }
        let h = self.x[1] - self.x[0];
        let val = |i: usize| if self.pdf[i].is_finite() { self.pdf[i] } else { T::zero() };
        let panels = (n - 1) / 2 * 2;
        let mut s = T::zero();
        let mut i = 0;
        while i + 2 <= panels {
            s = s + h / T::c(3.0) * (val(i) + T::c(4.0) * val(i + 1) + val(i + 2));
            i += 2;
        }
        if panels < n - 1 {
            s = s + h / T::c(2.0) * (val(n - 2) + val(n - 1));
        }
        s
    }
}

/// A limiting distribution that can be evaluated and sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitLaw<T> {
    /// `N(0, 1)`.
    Gaussian,
    /// `xi / sqrt(ell - 1)` with `xi ~ VG(ell - 1, 0, 1, 0)`.
    VgStandardized { ell: u32 },
    /// `sqrt(1 - r^2) Z + r xi / sqrt(ell - 1)`.
    SLimit { ell: u32, r: T },
    /// `sqrt(1 - r^2) Z_1 + r sqrt(2) I Z_2`, `I ~ Bernoulli(1/2)`.
    MixtureTwoHub { r: T },
    /// `Q_n = sum_{i<=n} W_i Z_i` with `W_i, Z_i ~ N(0, s^2)`.
    ProductSum { n: u32, s: T },
}

fn check_r<T: Real>(r: T) -> Result<()> {
    if !(r.abs() <= T::one()) {
        return Err(Error::invalid(format!("mixing coefficient must satisfy |r| <= 1, got {r}")));
    }
    Ok(())
}

fn check_ell(ell: u32) -> Result<()> {
    if ell < 2 {
        return Err(Error::invalid(format!("ell must be >= 2, got {ell}")));
    }
    Ok(())
}

impl<T: Real> LimitLaw<T> {
    pub fn gaussian() -> Self {
        LimitLaw::Gaussian
    }

    pub fn vg_standardized(ell: u32) -> Result<Self> {
        check_ell(ell)?;
        Ok(LimitLaw::VgStandardized { ell })
    }

    pub fn s_limit(ell: u32, r: T) -> Result<Self> {
        check_ell(ell)?;
        check_r(r)?;
        Ok(LimitLaw::SLimit { ell, r })
    }

    pub fn mixture_two_hub(r: T) -> Result<Self> {
        check_r(r)?;
        Ok(LimitLaw::MixtureTwoHub { r })
    }

    pub fn product_sum(n: u32, s: T) -> Result<Self> {
        if n == 0 || !(s > T::zero()) {
            return Err(Error::invalid("product sum needs n >= 1 and s > 0"));
        }
        Ok(LimitLaw::ProductSum { n, s })
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            LimitLaw::Gaussian => "gaussian".into(),
            LimitLaw::VgStandardized { ell } => format!("vg-standardized(ell={ell})"),
            LimitLaw::SLimit { ell, r } => format!("s-limit(ell={ell},r={r})"),
            LimitLaw::MixtureTwoHub { r } => format!("two-hub-mixture(r={r})"),
            LimitLaw::ProductSum { n, s } => format!("vg-product-sum(n={n},s={s})"),
        }
    }

    /// Collapses parameter values at which a law coincides with a simpler one.
    fn reduced(&self) -> Self {
        match *self {
            LimitLaw::SLimit { r, .. } if r == T::zero() => LimitLaw::Gaussian,
            LimitLaw::SLimit { ell, r } if r.abs() == T::one() => LimitLaw::VgStandardized { ell },
            LimitLaw::MixtureTwoHub { r } if r == T::zero() => LimitLaw::Gaussian,
            other => other,
        }
    }

    /// Point masses `(location, mass)` of the law.
    pub fn atoms(&self) -> Vec<(T, T)> {
        match self.reduced() {
            LimitLaw::MixtureTwoHub { r } if r.abs() == T::one() => vec![(T::zero(), T::c(0.5))],
            _ => Vec::new(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.atoms().is_empty()
    }

    /// Characteristic function (real: every law here is symmetric).
    pub fn cf(&self, t: T) -> T {
        let half = T::c(0.5);
        match *self {
            LimitLaw::Gaussian => (-t * t * half).exp(),
            LimitLaw::VgStandardized { ell } => {
                let a = T::from_u32(ell - 1).unwrap();
                (T::one() + t * t / a).powf(-a * half)
            }
            LimitLaw::SLimit { ell, r } => {
                let a = T::from_u32(ell - 1).unwrap();
                let r2 = r * r;
                (-(T::one() - r2) * t * t * half).exp() * (T::one() + r2 * t * t / a).powf(-a * half)
            }
            LimitLaw::MixtureTwoHub { r } => {
                let r2 = r * r;
                half * (-(T::one() - r2) * t * t * half).exp() + half * (-(T::one() + r2) * t * t * half).exp()
            }
            LimitLaw::ProductSum { n, s } => vg_cf(n, s, t),
        }
    }

    /// Density of the absolutely continuous part. `+inf` where it diverges.
    pub fn pdf(&self, x: T) -> Result<T> {
        let half = T::c(0.5);
        match self.reduced() {
            LimitLaw::Gaussian => Ok(normal_pdf(x)),
            LimitLaw::VgStandardized { ell } => {
                let a = T::from_u32(ell - 1).unwrap();
                Ok(a.sqrt() * vg_pdf(a, T::zero(), T::one(), T::zero(), x * a.sqrt())?)
            }
            LimitLaw::ProductSum { n, s } => vg_pdf(T::from_u32(n).unwrap(), T::zero(), s * s, T::zero(), x),
            LimitLaw::MixtureTwoHub { r } => {
                let lo = (T::one() - r * r).sqrt();
                let hi = (T::one() + r * r).sqrt();
                let narrow = if lo > T::zero() { normal_pdf(x / lo) / lo } else { T::zero() };
                Ok(half * narrow + half * normal_pdf(x / hi) / hi)
            }
            law @ LimitLaw::SLimit { .. } => cf_invert::pdf_at(&|t| law.cf(t), x),
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: T) -> Result<T> {
        self.cdf_impl(x, false)
    }

    /// `P(X < x)`; differs from [`Self::cdf`] only at atoms.
    pub fn cdf_left(&self, x: T) -> Result<T> {
        self.cdf_impl(x, true)
    }

    fn cdf_impl(&self, x: T, strict: bool) -> Result<T> {
        let half = T::c(0.5);
        match self.reduced() {
            LimitLaw::Gaussian => Ok(normal_cdf(x)),
            LimitLaw::VgStandardized { ell } => {
                let a = T::from_u32(ell - 1).unwrap();
                vg_cdf(a, T::one(), T::zero(), x * a.sqrt())
            }
            LimitLaw::ProductSum { n, s } => vg_cdf(T::from_u32(n).unwrap(), s * s, T::zero(), x),
            LimitLaw::MixtureTwoHub { r } => {
                let lo = (T::one() - r * r).sqrt();
                let hi = (T::one() + r * r).sqrt();
                let narrow = if lo > T::zero() {
                    normal_cdf(x / lo)
                } else if x > T::zero() || (x == T::zero() && !strict) {
                    T::one()
                } else {
                    T::zero()
                };
                Ok(half * narrow + half * normal_cdf(x / hi))
            }
            law @ LimitLaw::SLimit { .. } => cf_invert::cdf_at(&|t| law.cf(t), x),
        }
    }

    /// Raw moments `E[X], E[X^2], E[X^3], E[X^4]`.
    pub fn moments(&self) -> [T; 4] {
        let three = T::c(3.0);
        let fourth = match *self {
            LimitLaw::Gaussian => three,
            LimitLaw::VgStandardized { ell } => three + T::c(6.0) / T::from_u32(ell - 1).unwrap(),
            LimitLaw::SLimit { ell, r } => T::c(6.0) * r.powi(4) / T::from_u32(ell - 1).unwrap() + three,
            LimitLaw::MixtureTwoHub { r } => three * (T::one() + r.powi(4)),
            LimitLaw::ProductSum { n, s } => {
                let n = T::from_u32(n).unwrap();
                (three * n * n + T::c(6.0) * n) * s.powi(8)
            }
        };
        let second = match *self {
            LimitLaw::ProductSum { n, s } => T::from_u32(n).unwrap() * s.powi(4),
            _ => T::one(),
        };
        [T::zero(), second, T::zero(), fourth]
    }

    /// Draws one variate by composition.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let mut z = || -> f64 { StandardNormal.sample(rng) };
        let product_sum = |k: u32, z: &mut dyn FnMut() -> f64| -> f64 { (0..k).map(|_| z() * z()).sum() };
        let v = match *self {
            LimitLaw::Gaussian => z(),
            LimitLaw::VgStandardized { ell } => {
                let a = f64::from(ell - 1);
                product_sum(ell - 1, &mut z) / a.sqrt()
            }
            LimitLaw::SLimit { ell, r } => {
                let r = r.f64();
                let a = f64::from(ell - 1);
                let gauss = z();
                (1.0 - r * r).sqrt() * gauss + r * product_sum(ell - 1, &mut z) / a.sqrt()
            }
            LimitLaw::MixtureTwoHub { r } => {
                let r = r.f64();
                let z1 = z();
                let z2 = z();
                let i = if rng.random::<bool>() { 1.0 } else { 0.0 };
                (1.0 - r * r).sqrt() * z1 + r * std::f64::consts::SQRT_2 * i * z2
            }
            LimitLaw::ProductSum { n, s } => {
                let s2 = s.f64() * s.f64();
                product_sum(n, &mut z) * s2
            }
        };
        T::c(v)
    }

    /// Tabulates pdf and cdf on a grid: closed forms where available, numeric
    /// inversion of the characteristic function otherwise.
    pub fn table(&self, grid: &Grid<T>) -> Result<LawTable<T>> {
        match self.reduced() {
            law @ LimitLaw::SLimit { .. } => cf_invert(move |t| law.cf(t), grid),
            law => {
                let xs = grid.points()?;
                let rows: Vec<(T, T)> = xs
                    .par_iter()
                    .map(|&x| Ok((law.pdf(x)?, law.cdf(x)?)))
                    .collect::<Result<Vec<_>>>()?;
                let (pdf, cdf) = rows.into_iter().unzip();
                LawTable::from_raw(xs, pdf, cdf)
            }
        }
    }
}
