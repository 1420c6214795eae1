//! One- and two-sample Kolmogorov-Smirnov, Anderson-Darling against a fully
//! specified `N(0, 1)`, and Pearson chi-square with equiprobable cells.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Grid, LawTable, LimitLaw};
use crate::scalar::{chi2_sf, normal_cdf};

/// Significance levels reported in every [`GofReport`].
pub const DEFAULT_ALPHAS: [f64; 4] = [0.1, 0.05, 0.01, 0.001];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GofTest {
    Ks,
    AndersonDarling,
    PearsonChi2,
    TwoSampleKs,
}

impl fmt::Display for GofTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GofTest::Ks => "ks",
            GofTest::AndersonDarling => "anderson_darling",
            GofTest::PearsonChi2 => "pearson_chi2",
            GofTest::TwoSampleKs => "two_sample_ks",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub test_name: GofTest,
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: u64,
    pub reference_law: String,
    /// `(alpha, rejected)` pairs.
    pub decision_at: Vec<(f64, bool)>,
}

impl GofReport {
    fn new(test_name: GofTest, statistic: f64, p_value: f64, sample_size: usize, reference_law: String) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        GofReport {
            test_name,
            statistic,
            p_value,
            sample_size: sample_size as u64,
            reference_law,
            decision_at: DEFAULT_ALPHAS.iter().map(|&a| (a, p_value < a)).collect(),
        }
    }

    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

type CdfPair = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Reference distribution function returning `(F(x-), F(x))`.
#[derive(Clone)]
pub struct ReferenceCdf {
    label: String,
    eval: CdfPair,
}

impl fmt::Debug for ReferenceCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceCdf").field("label", &self.label).finish_non_exhaustive()
    }
}

/// Half-width and step of the tables behind laws without a closed-form cdf.
pub const REFERENCE_TABLE_GRID: (f64, f64) = (30.0, 0.01);

impl ReferenceCdf {
    /// Continuous reference given by a closure.
    pub fn from_fn(label: impl Into<String>, cdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ReferenceCdf {
            label: label.into(),
            eval: Arc::new(move |x| {
                let v = cdf(x);
                (v, v)
            }),
        }
    }

    pub fn gaussian() -> Self {
        ReferenceCdf::from_fn("gaussian", normal_cdf::<f64>)
    }

    /// Closed forms for the Gaussian and the two-hub mixture (atoms
    /// included); other laws are tabulated once on a fine grid and
    /// interpolated with cubic Hermite steps.
    pub fn from_law(law: &LimitLaw) -> Result<Self> {
        let label = law.label();
        match law {
            LimitLaw::Gaussian | LimitLaw::MixtureTwoHub { .. } => {
                let l = *law;
                // closed forms never fail
                l.cdf(0.0)?;
                Ok(ReferenceCdf {
                    label,
                    eval: Arc::new(move |x| (l.cdf_left(x).unwrap_or(f64::NAN), l.cdf(x).unwrap_or(f64::NAN))),
                })
            }
            _ => {
                let (half, step) = REFERENCE_TABLE_GRID;
                let table = law.table(&Grid::new(-half, half, step)?)?;
                Ok(ReferenceCdf::from_table(label, table))
            }
        }
    }

    pub fn from_table(label: impl Into<String>, table: LawTable) -> Self {
        let t = Arc::new(table);
        ReferenceCdf {
            label: label.into(),
            eval: Arc::new(move |x| {
                let v = t.cdf_hermite(x);
                (v, v)
            }),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.eval)(x).1
    }

    pub fn cdf_left(&self, x: f64) -> f64 {
        (self.eval)(x).0
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("goodness-of-fit test needs at least one sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("samples contain NaN"));
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= l) = sqrt(2 pi) / l sum_k exp(-(2k-1)^2 pi^2 / (8 l^2))
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value of `D` at effective sample size `n`, with Stephens'
/// finite-`n` correction of the scaling.
fn ks_pvalue(d: f64, n: f64) -> f64 {
    let sq = n.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample KS distance `sup |F_n - F|`, including left limits at atoms of
/// either distribution.
pub fn ks_distance(samples: &[f64], reference: &ReferenceCdf) -> Result<f64> {
    check_samples(samples)?;
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let (left, right) = (reference.eval)(x);
        d = d.max((i as f64 / n - left).abs()).max((j as f64 / n - right).abs());
        i = j;
    }
    if !d.is_finite() {
        return Err(Error::Numeric("reference cdf returned a non-finite value".into()));
    }
    Ok(d)
}

pub fn ks_statistic(samples: &[f64], reference: &ReferenceCdf) -> Result<GofReport> {
    let d = ks_distance(samples, reference)?;
    let p = ks_pvalue(d, samples.len() as f64);
    Ok(GofReport::new(GofTest::Ks, d, p, samples.len(), reference.label().to_owned()))
}

/// Two-sample KS; ties across the samples are stepped together.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<GofReport> {
    check_samples(a)?;
    check_samples(b)?;
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] == x {
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    Ok(GofReport::new(
        GofTest::TwoSampleKs,
        d,
        ks_pvalue(d, ne),
        xa.len() + xb.len(),
        "empirical".into(),
    ))
}

/// Asymptotic `P(A^2 <= z)` for a fully specified null (Marsaglia & Marsaglia).
fn ad_inf(z: f64) -> f64 {
    if z < 2.0 {
        (-1.233_714_1 / z).exp() / z.sqrt()
            * (2.000_12
                + (0.247_105 - (0.064_982_1 - (0.034_796_2 - (0.011_672 - 0.001_686_91 * z) * z) * z) * z) * z)
    } else {
        (-(1.0776 - (2.306_95 - (0.434_24 - (0.082_433 - (0.008_056 - 0.000_314_6 * z) * z) * z) * z) * z).exp()).exp()
    }
}

/// Finite-`n` correction to [`ad_inf`].
fn ad_errfix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
    }
    let t = (x - c) / (0.8 - c);
    let t = -0.000_226_33 + (6.540_34 - (14.6538 - (14.458 - (8.259 - 1.918_64 * t) * t) * t) * t) * t;
    t * (0.04213 / n + 0.01365 / (n * n)) / n
}

/// Upper-tail probability of `A^2 = z` at sample size `n`.
pub fn anderson_darling_pvalue(z: f64, n: usize) -> f64 {
    if !(z > 0.0) {
        return 1.0;
    }
    if z.is_infinite() {
        return 0.0;
    }
    const TAIL_FROM: f64 = 10.0;
    if z > TAIL_FROM {
        // the leading eigenvalue 1/2 of the A^2 series gives an e^{-z} tail
        return anderson_darling_pvalue(TAIL_FROM, n) * (TAIL_FROM - z).exp();
    }
    let x = ad_inf(z);
    (1.0 - (x + ad_errfix(n as f64, x))).clamp(0.0, 1.0)
}

/// Anderson-Darling statistic against `N(0, 1)` with no estimated parameters.
pub fn anderson_darling_normal(samples: &[f64]) -> Result<GofReport> {
    check_samples(samples)?;
    let xs = sorted(samples);
    let n = xs.len();
    let nf = n as f64;
    // ln Phi(x) and ln(1 - Phi(x)) = ln Phi(-x), both without cancellation
    let ln_cdf = |x: f64| normal_cdf(x).ln();
    let s: f64 = (0..n)
        .map(|i| {
            let w = (2 * i + 1) as f64;
            w * (ln_cdf(xs[i]) + ln_cdf(-xs[n - 1 - i]))
        })
        .sum();
    let a2 = -nf - s / nf;
    let a2 = if a2.is_nan() { f64::INFINITY } else { a2.max(0.0) };
    Ok(GofReport::new(
        GofTest::AndersonDarling,
        a2,
        anderson_darling_pvalue(a2, n),
        n,
        "gaussian".into(),
    ))
}

/// Default cell count `ceil(2 n^{2/5})`.
pub fn default_bins(n: usize) -> usize {
    (2.0 * (n as f64).powf(0.4)).ceil() as usize
}

/// Minimum expected count per cell.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pearson chi-square over `bins` cells equiprobable under the reference;
/// `chi^2(bins - 1)` p-value.
pub fn pearson_chi2(samples: &[f64], reference: &ReferenceCdf, bins: Option<usize>) -> Result<GofReport> {
    check_samples(samples)?;
    let n = samples.len();
    let k = bins.unwrap_or_else(|| default_bins(n));
    if k < 2 {
        return Err(Error::invalid(format!("chi-square needs at least 2 cells, got {k}")));
    }
    let expected = n as f64 / k as f64;
    if expected < MIN_EXPECTED {
        return Err(Error::invalid(format!(
            "expected count {expected:.2} per cell is below {MIN_EXPECTED} ({n} samples, {k} cells)"
        )));
    }
    let mut observed = vec![0u64; k];
    for &x in samples {
        let u = reference.cdf(x);
        if !u.is_finite() {
            return Err(Error::Numeric("reference cdf returned a non-finite value".into()));
        }
        let cell = ((u * k as f64).floor() as usize).min(k - 1);
        observed[cell] += 1;
    }
    let stat: f64 = observed
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok(GofReport::new(
        GofTest::PearsonChi2,
        stat,
        chi2_sf(stat, (k - 1) as f64),
        n,
        reference.label().to_owned(),
    ))
}
