//! Margins split into a lower part `U` (off the tail set `A`) and an upper
//! part `V` (on `A`, mass `1/ell`), with the conditional moments that enter
//! the mixing coefficient `r`.
//!
//! Vertex labels downstream are always uniform on `{1..ell}`; nothing here
//! accepts non-uniform label weights.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_kronrod, tanh_sinh, Tolerance};
use crate::scalar::{normal_cdf, normal_pdf, normal_quantile};

pub type PartSampler = Arc<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>;
pub type CdfFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type QuantileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative tolerance of the moment decompositions for closed-form margins.
pub const CLOSED_FORM_TOL: f64 = 1e-12;
/// Relative tolerance of the moment decompositions for quadrature margins.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Conditional and overall moments of a split margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mu_u: f64,
    pub sigma2_u: f64,
    pub mu_v: f64,
    pub sigma2_v: f64,
    pub mu: f64,
    pub sigma2: f64,
}

impl Moments {
    /// Overall moments implied by the parts.
    pub fn from_parts(ell: u32, mu_u: f64, sigma2_u: f64, mu_v: f64, sigma2_v: f64) -> Self {
        let w = 1.0 / ell as f64;
        let mu = (1.0 - w) * mu_u + w * mu_v;
        let d = mu_u - mu_v;
        let sigma2 = (1.0 - w) * sigma2_u + w * sigma2_v + w * (1.0 - w) * d * d;
        Moments {
            mu_u,
            sigma2_u,
            mu_v,
            sigma2_v,
            mu,
            sigma2,
        }
    }

    /// Largest scaled violation of the mean and variance decompositions.
    pub fn decomposition_error(&self, ell: u32) -> (f64, f64) {
        let implied = Moments::from_parts(ell, self.mu_u, self.sigma2_u, self.mu_v, self.sigma2_v);
        let scale = self.sigma2.sqrt().max(self.mu.abs());
        let mean_err = (implied.mu - self.mu).abs() / scale;
        let var_err = (implied.sigma2 - self.sigma2).abs() / self.sigma2;
        (mean_err, var_err)
    }
}

/// Which part of the margin a draw comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    U,
    V,
}

/// A margin `F` satisfying the split condition with tail mass `1/ell`.
#[derive(Clone)]
pub struct MarginSpec {
    ell: u32,
    sample_u: PartSampler,
    sample_v: PartSampler,
    moments: Moments,
    cdf: Option<CdfFn>,
    label: String,
}

impl fmt::Debug for MarginSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarginSpec")
            .field("label", &self.label)
            .field("ell", &self.ell)
            .field("moments", &self.moments)
            .finish_non_exhaustive()
    }
}

fn check_ell(ell: u32) -> Result<()> {
    if ell < 2 {
        return Err(Error::invalid(format!("ell must be >= 2, got {ell}")));
    }
    Ok(())
}

impl MarginSpec {
    /// Assembles a spec from user-supplied parts, enforcing the moment
    /// decompositions to relative tolerance `tol`.
    pub fn new(
        label: impl Into<String>,
        ell: u32,
        sample_u: PartSampler,
        sample_v: PartSampler,
        moments: Moments,
        cdf: Option<CdfFn>,
        tol: f64,
    ) -> Result<Self> {
        check_ell(ell)?;
        let m = moments;
        let all = [m.mu_u, m.sigma2_u, m.mu_v, m.sigma2_v, m.mu, m.sigma2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("margin moments not finite: {m:?}")));
        }
        if !(m.sigma2 > 0.0) {
            return Err(Error::invalid(format!("margin variance must be > 0, got {}", m.sigma2)));
        }
        if m.sigma2_u < 0.0 || m.sigma2_v < 0.0 {
            return Err(Error::invalid("conditional variances must be >= 0"));
        }
        let (mean_err, var_err) = m.decomposition_error(ell);
        if mean_err > tol || var_err > tol {
            return Err(Error::invalid(format!(
                "moment decomposition violated (mean {mean_err:e}, variance {var_err:e}, tolerance {tol:e})"
            )));
        }
        Ok(MarginSpec {
            ell,
            sample_u,
            sample_v,
            moments,
            cdf,
            label: label.into(),
        })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn moments(&self) -> &Moments {
        &self.moments
    }

    pub fn cdf(&self) -> Option<&CdfFn> {
        self.cdf.as_ref()
    }

    pub fn mixing_coefficient(&self) -> Result<f64> {
        mixing_coefficient(self)
    }

    pub fn sample_part(&self, part: Part, rng: &mut dyn RngCore) -> f64 {
        match part {
            Part::U => (self.sample_u)(rng),
            Part::V => (self.sample_v)(rng),
        }
    }

    /// Sum of `count` independent draws from one part. Degenerate parts are
    /// summed without drawing.
    pub fn sum_part(&self, part: Part, count: u64, rng: &mut dyn RngCore) -> f64 {
        let (mu, var) = match part {
            Part::U => (self.moments.mu_u, self.moments.sigma2_u),
            Part::V => (self.moments.mu_v, self.moments.sigma2_v),
        };
        if var == 0.0 {
            return count as f64 * mu;
        }
        (0..count).map(|_| self.sample_part(part, rng)).sum()
    }

    /// One draw from `F` through the mixture: `V` with probability `1/ell`.
    pub fn sample_mixture(&self, rng: &mut dyn RngCore) -> f64 {
        let part = if rng.random_range(0..self.ell) == 0 { Part::V } else { Part::U };
        self.sample_part(part, rng)
    }
}

/// `r = sqrt((1/ell)(1 - 1/ell)) (mu_V - mu_U) / sigma`.
pub fn mixing_coefficient(spec: &MarginSpec) -> Result<f64> {
    let m = spec.moments;
    if !(m.sigma2 > 0.0) {
        return Err(Error::invalid("mixing coefficient undefined for a degenerate margin (sigma = 0)"));
    }
    let w = 1.0 / spec.ell as f64;
    let r = (w * (1.0 - w)).sqrt() * (m.mu_v - m.mu_u) / m.sigma2.sqrt();
    if r.abs() > 1.0 + 1e-12 {
        return Err(Error::Numeric(format!("mixing coefficient {r} outside [-1, 1]")));
    }
    Ok(r.clamp(-1.0, 1.0))
}

fn open01(rng: &mut dyn RngCore) -> f64 {
    rng.sample(Open01)
}

/// Bernoulli(1/2) with `ell = 2` and `A = {1}`: `U = 0`, `V = 1`.
pub fn margin_bernoulli_half() -> MarginSpec {
    let moments = Moments::from_parts(2, 0.0, 0.0, 1.0, 0.0);
    let cdf: CdfFn = Arc::new(|x| {
        if x < 0.0 {
            0.0
        } else if x < 1.0 {
            0.5
        } else {
            1.0
        }
    });
    MarginSpec::new(
        "bernoulli",
        2,
        Arc::new(|_| 0.0),
        Arc::new(|_| 1.0),
        moments,
        Some(cdf),
        CLOSED_FORM_TOL,
    )
    .expect("closed-form Bernoulli margin is valid")
}

/// Uniform(0, 1) with `A = (1 - 1/ell, 1)`.
pub fn margin_uniform01(ell: u32) -> Result<MarginSpec> {
    check_ell(ell)?;
    let w = 1.0 / ell as f64;
    let cut = 1.0 - w;
    let moments = Moments {
        mu_u: cut / 2.0,
        sigma2_u: cut * cut / 12.0,
        mu_v: (1.0 + cut) / 2.0,
        sigma2_v: w * w / 12.0,
        mu: 0.5,
        sigma2: 1.0 / 12.0,
    };
    MarginSpec::new(
        format!("uniform01(ell={ell})"),
        ell,
        Arc::new(move |rng| cut * open01(rng)),
        Arc::new(move |rng| 1.0 - w * open01(rng)),
        moments,
        Some(Arc::new(|x: f64| x.clamp(0.0, 1.0))),
        CLOSED_FORM_TOL,
    )
}

/// Standard normal with `A = (z, inf)`, `z = Phi^{-1}(1 - 1/ell)`; truncated
/// normal moments in closed form.
pub fn margin_std_normal(ell: u32) -> Result<MarginSpec> {
    check_ell(ell)?;
    let w = 1.0 / ell as f64;
    let cut = 1.0 - w;
    // z from the upper tail keeps full precision for large ell
    let z = -normal_quantile(w);
    let phi = normal_pdf(z);
    let mu_v = phi / w;
    let mu_u = -phi / cut;
    let moments = Moments {
        mu_u,
        sigma2_u: 1.0 - z * phi / cut - mu_u * mu_u,
        mu_v,
        sigma2_v: 1.0 + z * phi / w - mu_v * mu_v,
        mu: 0.0,
        sigma2: 1.0,
    };
    MarginSpec::new(
        format!("normal(ell={ell})"),
        ell,
        // U = Phi^{-1}(cut * u); V = -Phi^{-1}(w * u) by symmetry
        Arc::new(move |rng| normal_quantile(cut * open01(rng))),
        Arc::new(move |rng| -normal_quantile(w * open01(rng))),
        moments,
        Some(Arc::new(normal_cdf::<f64>)),
        CLOSED_FORM_TOL,
    )
}

/// Named built-in margin, as selected on the command line.
pub fn margin_by_name(name: &str, ell: u32) -> Result<MarginSpec> {
    match name.trim().to_ascii_lowercase().as_str() {
        "bernoulli" | "bernoulli_half" => {
            if ell != 2 {
                return Err(Error::invalid(format!("the Bernoulli(1/2) margin needs ell = 2, got {ell}")));
            }
            Ok(margin_bernoulli_half())
        }
        "uniform01" | "uniform" => margin_uniform01(ell),
        "normal" | "std_normal" => margin_std_normal(ell),
        other => Err(Error::invalid(format!(
            "unknown margin `{other}` (expected bernoulli, uniform01 or normal)"
        ))),
    }
}

/// Tolerances for the conditional-moment quadratures of custom margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentQuadrature {
    pub abs: f64,
    pub rel: f64,
}

impl Default for MomentQuadrature {
    fn default() -> Self {
        MomentQuadrature { abs: 1e-10, rel: 1e-10 }
    }
}

const ATOM_PROBE: f64 = 1e-7;

const MOMENT_PANELS: usize = 16;

/// Integral of `f` over `[lo, hi]` on equal panels. Each panel tries
/// tanh-sinh (endpoint singularities) and falls back to adaptive
/// Gauss-Kronrod (kinks and jumps of a quantile function).
fn integrate_panels<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64> {
    let step = (hi - lo) / MOMENT_PANELS as f64;
    let panel_tol = Tolerance::new(tol.abs / MOMENT_PANELS as f64, tol.rel);
    let mut total = 0.0;
    for k in 0..MOMENT_PANELS {
        let a = lo + step * k as f64;
        let b = if k + 1 == MOMENT_PANELS { hi } else { lo + step * (k + 1) as f64 };
        let v = match tanh_sinh(&f, a, b, panel_tol) {
            Ok(e) => e.value,
            Err(Error::Quadrature { .. }) => gauss_kronrod(&f, a, b, panel_tol)?.value,
            Err(e) => return Err(e),
        };
        total += v;
    }
    Ok(total)
}

fn part_moments(q: &QuantileFn, lo: f64, hi: f64, tol: Tolerance) -> Result<(f64, f64)> {
    let width = hi - lo;
    let mean = integrate_panels(|p| q(p), lo, hi, tol).map_err(|e| moment_error("mean", e))? / width;
    if !mean.is_finite() {
        return Err(Error::Numeric("conditional mean overflowed".into()));
    }
    let var = integrate_panels(
        |p| {
            let d = q(p) - mean;
            d * d
        },
        lo,
        hi,
        tol,
    )
    .map_err(|e| moment_error("variance", e))?
        / width;
    if !var.is_finite() {
        return Err(Error::Numeric("conditional variance overflowed (infinite variance?)".into()));
    }
    Ok((mean, var))
}

fn moment_error(what: &str, e: Error) -> Error {
    match e {
        Error::Quadrature { context, residual } => Error::Quadrature {
            context: format!("conditional {what} of custom margin: {context}"),
            residual,
        },
        other => other,
    }
}

/// `F(x) = sup { p : Q(p) <= x }` by bisection on the quantile function.
fn cdf_from_quantile(q: QuantileFn) -> CdfFn {
    Arc::new(move |x| {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if q(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Margin given by its quantile function, with `A` the upper `1/ell` tail.
/// Conditional moments come from panel-wise quadrature of `Q` over
/// `(0, 1 - 1/ell)` and `(1 - 1/ell, 1)`.
pub fn margin_custom(
    label: impl Into<String>,
    quantile: QuantileFn,
    ell: u32,
    cfg: MomentQuadrature,
) -> Result<MarginSpec> {
    check_ell(ell)?;
    let w = 1.0 / ell as f64;
    let cut = 1.0 - w;
    let tol = Tolerance::new(cfg.abs, cfg.rel);
    let (mu_u, sigma2_u) = part_moments(&quantile, 0.0, cut, tol)?;
    let (mu_v, sigma2_v) = part_moments(&quantile, cut, 1.0, tol)?;
    let moments = Moments::from_parts(ell, mu_u, sigma2_u, mu_v, sigma2_v);
    let flat = quantile(1e-9) == quantile(1.0 - 1e-9);
    if flat || !(moments.sigma2 > 1e-24 * moments.mu.abs().max(1.0).powi(2)) {
        return Err(Error::invalid("custom margin is degenerate (sigma = 0)"));
    }
    if quantile(cut - ATOM_PROBE) == quantile(cut + ATOM_PROBE) {
        return Err(Error::invalid(format!(
            "margin has an atom at its {cut}-quantile; the tail set would not have mass exactly 1/{ell}"
        )));
    }
    let qu = quantile.clone();
    let qv = quantile.clone();
    MarginSpec::new(
        label,
        ell,
        Arc::new(move |rng| qu(cut * open01(rng))),
        Arc::new(move |rng| qv(1.0 - w * open01(rng))),
        moments,
        Some(cdf_from_quantile(quantile)),
        QUADRATURE_TOL,
    )
}

/// Quantile table `{"quantile_table": [[p, x], ...], "ell": k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub quantile_table: Vec<[f64; 2]>,
    pub ell: u32,
}

impl QuantileTable {
    pub fn from_json(s: &str) -> Result<Self> {
        let t: QuantileTable = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.quantile_table;
        if t.len() < 2 {
            return Err(Error::invalid("quantile table needs at least two rows"));
        }
        if t[0][0] != 0.0 || t[t.len() - 1][0] != 1.0 {
            return Err(Error::invalid("quantile table must start at p = 0 and end at p = 1"));
        }
        for w in t.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(Error::invalid("quantile table probabilities must be strictly increasing"));
            }
            if !(w[1][1] >= w[0][1]) || !w[1][1].is_finite() || !w[0][1].is_finite() {
                return Err(Error::invalid("quantile table values must be finite and nondecreasing"));
            }
        }
        Ok(())
    }

    /// Piecewise-linear (hence monotone) interpolated quantile function.
    pub fn quantile_fn(&self) -> QuantileFn {
        let t = self.quantile_table.clone();
        Arc::new(move |p: f64| {
            let k = t.partition_point(|row| row[0] <= p).clamp(1, t.len() - 1);
            let (a, b) = (t[k - 1], t[k]);
            let s = ((p - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0);
            a[1] + s * (b[1] - a[1])
        })
    }

    /// Segments of the interpolant restricted to `[lo, hi]`, as
    /// `(width, x_start, x_end)`.
    fn segments(&self, lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
        let q = self.quantile_fn();
        let mut cuts = vec![lo];
        cuts.extend(self.quantile_table.iter().map(|r| r[0]).filter(|&p| p > lo && p < hi));
        cuts.push(hi);
        cuts.windows(2).map(|c| (c[1] - c[0], q(c[0]), q(c[1]))).collect()
    }

    /// Exact mean and variance of the interpolated law on `[lo, hi]`.
    fn part_moments(&self, lo: f64, hi: f64) -> (f64, f64) {
        let segs = self.segments(lo, hi);
        let width = hi - lo;
        let mean = segs.iter().map(|&(dp, a, b)| dp * (a + b) / 2.0).sum::<f64>() / width;
        let var = segs
            .iter()
            .map(|&(dp, a, b)| {
                let (a, d) = (a - mean, b - a);
                dp * (a * a + a * d + d * d / 3.0)
            })
            .sum::<f64>()
            / width;
        (mean, var)
    }
}

/// Margin from a quantile table; moments are integrated exactly over the
/// linear segments.
pub fn margin_quantile_table(table: &QuantileTable) -> Result<MarginSpec> {
    table.validate()?;
    let ell = table.ell;
    check_ell(ell)?;
    let w = 1.0 / ell as f64;
    let cut = 1.0 - w;
    let quantile = table.quantile_fn();
    if quantile(cut - ATOM_PROBE) == quantile(cut + ATOM_PROBE) {
        return Err(Error::invalid(format!(
            "quantile table is flat across p = {cut}: atom at the split point"
        )));
    }
    let (mu_u, sigma2_u) = table.part_moments(0.0, cut);
    let (mu_v, sigma2_v) = table.part_moments(cut, 1.0);
    let moments = Moments::from_parts(ell, mu_u, sigma2_u, mu_v, sigma2_v);
    if !(moments.sigma2 > 0.0) {
        return Err(Error::invalid("quantile table describes a degenerate margin (sigma = 0)"));
    }
    let qu = quantile.clone();
    let qv = quantile.clone();
    MarginSpec::new(
        "quantile_table",
        ell,
        Arc::new(move |rng| qu(cut * open01(rng))),
        Arc::new(move |rng| qv(1.0 - w * open01(rng))),
        moments,
        Some(cdf_from_quantile(quantile)),
        CLOSED_FORM_TOL,
    )
}
