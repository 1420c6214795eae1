//! Realizations of labels, edge indicators, counts and mixed sequences, plus
//! the exact fast paths for the bipartite, two-hub and fan families.
//!
//! Every fast path is split into drawing its random components and a pure
//! `combine` step; the exact pmf of a fast path enumerates the component laws
//! and reuses the same `combine`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Family, Graph};
use crate::margins::{MarginSpec, Part};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "KWISE_THREADS";

/// One realization of the construction on a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub ell: u32,
    /// Vertex labels in `1..=ell`.
    pub m_labels: Vec<u32>,
    /// Edge indicators in canonical edge order.
    pub d_values: Vec<bool>,
    pub xi_count: u64,
    pub xi_std: f64,
    pub x_values: Option<Vec<f64>>,
    pub s_n: Option<f64>,
}

fn check_ell(ell: u32) -> Result<()> {
    if ell < 2 {
        return Err(Error::invalid(format!("ell must be >= 2, got {ell}")));
    }
    Ok(())
}

/// `(Xi - n/ell) / sqrt(n (1/ell)(1 - 1/ell))`, always with the analytic moments.
pub fn standardize_xi(xi_count: u64, n: u64, ell: u32) -> f64 {
    let w = 1.0 / ell as f64;
    let n = n as f64;
    (xi_count as f64 - n * w) / (n * w * (1.0 - w)).sqrt()
}

/// `(sum - n mu) / (sigma sqrt(n))`.
pub fn standardize_sum(sum: f64, n: u64, spec: &MarginSpec) -> f64 {
    let m = spec.moments();
    let n = n as f64;
    (sum - n * m.mu) / (m.sigma2.sqrt() * n.sqrt())
}

/// Independent uniform labels on `{1..ell}`, one per vertex.
pub fn draw_labels<R: Rng + ?Sized>(g: &Graph, ell: u32, rng: &mut R) -> Result<Vec<u32>> {
    check_ell(ell)?;
    Ok((0..g.vertex_count()).map(|_| rng.random_range(1..=ell)).collect())
}

/// Edge indicators, their count and the standardized count.
pub fn edge_indicators(g: &Graph, labels: &[u32], ell: u32) -> Result<(Vec<bool>, u64, f64)> {
    check_ell(ell)?;
    if labels.len() != g.vertex_count() {
        return Err(Error::invalid(format!(
            "{} labels for a graph with {} vertices",
            labels.len(),
            g.vertex_count()
        )));
    }
    let d: Vec<bool> = g
        .edges()
        .iter()
        .map(|&(i, j)| labels[i as usize] == labels[j as usize])
        .collect();
    let count = d.iter().filter(|&&b| b).count() as u64;
    Ok((d, count, standardize_xi(count, g.edge_count() as u64, ell)))
}

/// Count of equal-label edges without materializing the indicators.
fn count_equal(g: &Graph, labels: &[u32]) -> u64 {
    g.edges()
        .iter()
        .filter(|&&(i, j)| labels[i as usize] == labels[j as usize])
        .count() as u64
}

/// Labels and indicators for one realization on `g`.
pub fn sample_sequence<R: Rng + ?Sized>(g: &Graph, ell: u32, rng: &mut R) -> Result<SequenceSample> {
    let m_labels = draw_labels(g, ell, rng)?;
    let (d_values, xi_count, xi_std) = edge_indicators(g, &m_labels, ell)?;
    Ok(SequenceSample {
        ell,
        m_labels,
        d_values,
        xi_count,
        xi_std,
        x_values: None,
        s_n: None,
    })
}

/// Attaches `X_k` (from `V` where `D_k = 1`, from `U` otherwise; fresh draws
/// per edge) and the standardized mean `S_n`.
pub fn build_x_sequence(sample: &mut SequenceSample, spec: &MarginSpec, rng: &mut dyn RngCore) -> Result<()> {
    if spec.ell() != sample.ell {
        return Err(Error::invalid(format!(
            "margin split uses ell = {} but labels use ell = {}",
            spec.ell(),
            sample.ell
        )));
    }
    let xs: Vec<f64> = sample
        .d_values
        .iter()
        .map(|&d| spec.sample_part(if d { Part::V } else { Part::U }, rng))
        .collect();
    let sum: f64 = xs.iter().sum();
    sample.s_n = Some(standardize_sum(sum, xs.len() as u64, spec));
    sample.x_values = Some(xs);
    Ok(())
}

/// Pure combination steps of the exact representations.
pub mod combine {
    /// `Xi = sum_i N1_i N2_i`.
    pub fn bipartite(n1: &[u64], n2: &[u64]) -> u64 {
        n1.iter().zip(n2).map(|(a, b)| a * b).sum()
    }

    /// `Xi = I 2B + (1 - I) m`.
    pub fn two_hub(m: u64, hubs_equal: bool, b: u64) -> u64 {
        if hubs_equal {
            2 * b
        } else {
            m
        }
    }

    /// `Xi = I (1 + m + 2B) + (1 - I) 2 (m - B)`.
    pub fn fan(m: u64, ends_equal: bool, b: u64) -> u64 {
        if ends_equal {
            1 + m + 2 * b
        } else {
            2 * (m - b)
        }
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
}

/// Multinomial counts of `m` trials over `ell` equiprobable cells, by
/// sequential conditional binomials.
fn multinomial<R: Rng + ?Sized>(m: u64, ell: u32, rng: &mut R) -> Vec<u64> {
    let mut rem = m;
    let mut counts = Vec::with_capacity(ell as usize);
    for i in 0..ell - 1 {
        let k = if rem == 0 { 0 } else { binomial(rem, 1.0 / (ell - i) as f64, rng) };
        counts.push(k);
        rem -= k;
    }
    counts.push(rem);
    counts
}

/// `Xi` on `K_{m,m}` from two label-count vectors; O(m + ell).
pub fn xi_fast_bipartite<R: Rng + ?Sized>(m: u32, ell: u32, rng: &mut R) -> Result<(u64, f64)> {
    check_ell(ell)?;
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    let n1 = multinomial(m.into(), ell, rng);
    let n2 = multinomial(m.into(), ell, rng);
    let xi = combine::bipartite(&n1, &n2);
    let m = u64::from(m);
    Ok((xi, standardize_xi(xi, m * m, ell)))
}

/// `Xi` on the two-hub graph at `ell = 2`: `I ~ Bernoulli(1/2)`, `B ~ Bin(m, 1/2)`.
/// Standardized with `E = m`, `Var = m / 2`.
pub fn xi_fast_two_hub<R: Rng + ?Sized>(m: u32, rng: &mut R) -> Result<(u64, f64)> {
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    let i = rng.random_bool(0.5);
    let b = binomial(m.into(), 0.5, rng);
    let xi = combine::two_hub(m.into(), i, b);
    Ok((xi, standardize_xi(xi, 2 * u64::from(m), 2)))
}

/// `Xi` on the fan at `ell = 2`: `I ~ Bernoulli(1/2)`, `B ~ Bin(m, 1/4)`.
/// Standardized with `E = 3m/2 + 1/2`, `Var = 3m/4 + 1/4`.
pub fn xi_fast_fan<R: Rng + ?Sized>(m: u32, rng: &mut R) -> Result<(u64, f64)> {
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    let i = rng.random_bool(0.5);
    let b = binomial(m.into(), 0.25, rng);
    let xi = combine::fan(m.into(), i, b);
    Ok((xi, standardize_xi(xi, 3 * u64::from(m) + 1, 2)))
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

fn binom(n: u64, k: u64) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn compositions(m: u64, parts: u32, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if parts == 1 {
        prefix.push(m);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in 0..=m {
        prefix.push(k);
        compositions(m - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Largest number of component outcomes the exact fast-path pmf enumerates.
pub const FAST_PMF_CAP: usize = 1 << 22;

/// Exact pmf of `Xi` as produced by a fast path, from the exact laws of its
/// components and the shared [`combine`] step.
pub fn fast_path_pmf(family: Family, m: u32, ell: u32) -> Result<BTreeMap<u64, BigRational>> {
    check_ell(ell)?;
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    let m = u64::from(m);
    let mut pmf: BTreeMap<u64, BigRational> = BTreeMap::new();
    let mut add = |xi: u64, p: BigRational| *pmf.entry(xi).or_insert_with(BigRational::zero) += p;
    let half = BigRational::new(1.into(), 2.into());
    match family {
        Family::Bipartite => {
            let mut comps = Vec::new();
            compositions(m, ell, &mut Vec::new(), &mut comps);
            if comps.len().saturating_mul(comps.len()) > FAST_PMF_CAP {
                return Err(Error::EnumerationCap {
                    states: (comps.len() as u128).pow(2),
                    cap: FAST_PMF_CAP as u128,
                });
            }
            let denom = BigInt::from(ell).pow(m as u32);
            let probs: Vec<BigRational> = comps
                .iter()
                .map(|c| {
                    let ways = c.iter().fold(factorial(m), |acc, &k| acc / factorial(k));
                    BigRational::new(ways, denom.clone())
                })
                .collect();
            for (c1, p1) in comps.iter().zip(&probs) {
                for (c2, p2) in comps.iter().zip(&probs) {
                    add(combine::bipartite(c1, c2), p1 * p2);
                }
            }
        }
        Family::TwoHub | Family::Fan => {
            if ell != 2 {
                return Err(Error::invalid(format!("the {family} fast path requires ell = 2")));
            }
            let (num, den) = if family == Family::TwoHub { (1u64, 2u64) } else { (1, 4) };
            let denom = BigInt::from(den).pow(m as u32);
            for b in 0..=m {
                // C(m, b) num^b (den - num)^(m - b) / den^m
                let w = binom(m, b) * BigInt::from(num).pow(b as u32) * BigInt::from(den - num).pow((m - b) as u32);
                let pb = BigRational::new(w, denom.clone());
                for i in [false, true] {
                    let xi = if family == Family::TwoHub {
                        combine::two_hub(m, i, b)
                    } else {
                        combine::fan(m, i, b)
                    };
                    add(xi, &half * &pb);
                }
            }
        }
        other => return Err(Error::invalid(format!("no fast path for the {other} family"))),
    }
    Ok(pmf)
}

/// Whether `family` has an exact fast path at this `ell`.
pub fn has_fast_path(family: Family, ell: u32) -> bool {
    match family {
        Family::Bipartite => true,
        Family::TwoHub | Family::Fan => ell == 2,
        _ => false,
    }
}

/// Graph or family member to simulate. Fast paths never build the graph.
#[derive(Debug, Clone)]
pub enum SimulationTarget {
    Graph(Graph),
    Family { family: Family, param: u64 },
}

impl SimulationTarget {
    pub fn family(&self) -> Family {
        match self {
            SimulationTarget::Graph(g) => g.family(),
            SimulationTarget::Family { family, .. } => *family,
        }
    }

    pub fn param(&self) -> u64 {
        match self {
            SimulationTarget::Graph(g) => g.param(),
            SimulationTarget::Family { param, .. } => *param,
        }
    }

    fn graph(&self) -> Result<Graph> {
        match self {
            SimulationTarget::Graph(g) => Ok(g.clone()),
            SimulationTarget::Family { family, param } => family.build(*param),
        }
    }

    /// Number of edges `n` of the target.
    pub fn edge_count(&self) -> Result<u64> {
        let p = self.param();
        Ok(match (self, self.family()) {
            (SimulationTarget::Graph(g), _) => g.edge_count() as u64,
            (_, Family::Bipartite) => p * p,
            (_, Family::TwoHub) => 2 * p,
            (_, Family::Fan) => 3 * p + 1,
            _ => self.graph()?.edge_count() as u64,
        })
    }
}

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub ell: u32,
    pub replications: u64,
    pub seed: u64,
    pub fast_path: bool,
    /// Worker count; `None` falls back to `KWISE_THREADS`, then to rayon's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Output row of [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub rep_index: u64,
    pub xi_count: u64,
    pub xi_std: f64,
    pub s_n: Option<f64>,
}

/// RNG stream of replication `rep` under `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Worker count from an explicit setting or `KWISE_THREADS`.
pub fn resolve_threads(explicit: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = explicit {
        if t == 0 {
            return Err(Error::invalid("thread count must be >= 1"));
        }
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .map(Some)
            .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Runs `f` inside a rayon pool of the resolved size.
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = resolve_threads(threads)? {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numeric(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Independent replications of `(Xi, xi, S_n)`. Replication `j` draws from
/// [`replication_rng`]`(seed, j)`, so output does not depend on the worker
/// count. `S_n` is present iff a margin is given.
pub fn simulate(target: &SimulationTarget, margin: Option<&MarginSpec>, cfg: &SimulationConfig) -> Result<Vec<SimRecord>> {
    check_ell(cfg.ell)?;
    if cfg.replications == 0 {
        return Err(Error::invalid("replications must be >= 1"));
    }
    if let Some(spec) = margin {
        if spec.ell() != cfg.ell {
            return Err(Error::invalid(format!(
                "margin split uses ell = {} but the simulation uses ell = {}",
                spec.ell(),
                cfg.ell
            )));
        }
    }
    let family = target.family();
    let n = target.edge_count()?;
    let m = u32::try_from(target.param()).map_err(|_| Error::invalid("family parameter too large"));
    enum Path {
        Fast(Family, u32),
        Edges(Graph),
    }
    let path = if cfg.fast_path {
        if !has_fast_path(family, cfg.ell) {
            return Err(Error::invalid(format!(
                "no fast path for the {family} family at ell = {} (bipartite: any ell; two_hub, fan: ell = 2)",
                cfg.ell
            )));
        }
        Path::Fast(family, m?)
    } else {
        Path::Edges(target.graph()?)
    };
    let run = |rep: u64| -> Result<SimRecord> {
        let mut rng = replication_rng(cfg.seed, rep);
        match &path {
            Path::Fast(f, m) => {
                let (xi_count, xi_std) = match f {
                    Family::Bipartite => xi_fast_bipartite(*m, cfg.ell, &mut rng)?,
                    Family::TwoHub => xi_fast_two_hub(*m, &mut rng)?,
                    _ => xi_fast_fan(*m, &mut rng)?,
                };
                let s_n = margin.map(|spec| {
                    let sum = spec.sum_part(Part::V, xi_count, &mut rng) + spec.sum_part(Part::U, n - xi_count, &mut rng);
                    standardize_sum(sum, n, spec)
                });
                Ok(SimRecord {
                    rep_index: rep,
                    xi_count,
                    xi_std,
                    s_n,
                })
            }
            Path::Edges(g) => match margin {
                None => {
                    let labels = draw_labels(g, cfg.ell, &mut rng)?;
                    let xi_count = count_equal(g, &labels);
                    Ok(SimRecord {
                        rep_index: rep,
                        xi_count,
                        xi_std: standardize_xi(xi_count, n, cfg.ell),
                        s_n: None,
                    })
                }
                Some(spec) => {
                    let mut s = sample_sequence(g, cfg.ell, &mut rng)?;
                    build_x_sequence(&mut s, spec, &mut rng)?;
                    Ok(SimRecord {
                        rep_index: rep,
                        xi_count: s.xi_count,
                        xi_std: s.xi_std,
                        s_n: s.s_n,
                    })
                }
            },
        }
    };
    with_pool(cfg.threads, || (0..cfg.replications).into_par_iter().map(run).collect())?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_bipartite, fan, two_hub};
    use crate::margins::{margin_bernoulli_half, margin_uniform01};

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn label_frequencies() {
        let g = Graph::custom(1_000_000, vec![]).unwrap();
        let mut rng = replication_rng(11, 0);
        let labels = draw_labels(&g, 2, &mut rng).unwrap();
        let ones = labels.iter().filter(|&&l| l == 1).count() as f64 / 1e6;
        assert!((0.498..=0.502).contains(&ones), "{ones}");
        assert!(labels.iter().all(|&l| l == 1 || l == 2));
    }

    #[test]
    fn labels_reject_ell_one_and_repeat() {
        let g = complete_bipartite(3).unwrap();
        assert!(draw_labels(&g, 1, &mut replication_rng(0, 0)).is_err());
        let a = draw_labels(&g, 3, &mut replication_rng(5, 9)).unwrap();
        let b = draw_labels(&g, 3, &mut replication_rng(5, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indicators_on_k22() {
        let g = complete_bipartite(2).unwrap();
        let (d, xi, _) = edge_indicators(&g, &[1, 1, 1, 1], 2).unwrap();
        assert_eq!((d, xi), (vec![true; 4], 4));
        let (_, xi, std) = edge_indicators(&g, &[1, 2, 1, 2], 2).unwrap();
        assert_eq!(xi, 2);
        assert_eq!(std, 0.0);
        assert!(edge_indicators(&g, &[1, 2], 2).is_err());
    }

    #[test]
    fn combine_extremes() {
        assert_eq!(combine::bipartite(&[5, 0], &[5, 0]), 25);
        assert_eq!(combine::two_hub(7, false, 3), 7);
        assert_eq!(combine::fan(4, true, 0), 5);
    }

    #[test]
    fn fast_pmfs_closed_forms() {
        let p = fast_path_pmf(Family::TwoHub, 3, 2).unwrap();
        let want: BTreeMap<u64, BigRational> =
            [(0, rat(1, 16)), (2, rat(3, 16)), (3, rat(1, 2)), (4, rat(3, 16)), (6, rat(1, 16))].into();
        assert_eq!(p, want);
        // on K_{2,2} at ell = 2 the count is always even
        let p = fast_path_pmf(Family::Bipartite, 2, 2).unwrap();
        let want: BTreeMap<u64, BigRational> = [(0, rat(1, 8)), (2, rat(3, 4)), (4, rat(1, 8))].into();
        assert_eq!(p, want);
        assert!(fast_path_pmf(Family::Hypercube, 2, 2).is_err());
        assert!(fast_path_pmf(Family::Fan, 2, 3).is_err());
    }

    #[test]
    fn fast_pmf_moments_are_the_formulas() {
        for m in 1..=6u32 {
            let p = fast_path_pmf(Family::Fan, m, 2).unwrap();
            let mean: BigRational = p.iter().map(|(&x, w)| w * BigRational::from_integer(x.into())).sum();
            let sq: BigRational = p.iter().map(|(&x, w)| w * BigRational::from_integer((x * x).into())).sum();
            let var = sq - &mean * &mean;
            assert_eq!(mean, rat(3 * m as i64 + 1, 2));
            assert_eq!(var, rat(3 * m as i64 + 1, 4));
            let p = fast_path_pmf(Family::TwoHub, m, 2).unwrap();
            let mean: BigRational = p.iter().map(|(&x, w)| w * BigRational::from_integer(x.into())).sum();
            let sq: BigRational = p.iter().map(|(&x, w)| w * BigRational::from_integer((x * x).into())).sum();
            assert_eq!(mean, rat(m as i64, 1));
            assert_eq!(sq - &mean * &mean, rat(m as i64, 2));
        }
    }

    #[test]
    fn fast_path_means() {
        let reps = 100_000;
        let mut rng = replication_rng(1, 0);
        let xs: Vec<f64> = (0..reps).map(|_| xi_fast_bipartite(10, 3, &mut rng).unwrap().0 as f64).collect();
        let (mean, sd) = mean_sd(&xs);
        assert!((mean - 100.0 / 3.0).abs() < 3.0 * sd / (reps as f64).sqrt());
        let xs: Vec<f64> = (0..reps).map(|_| xi_fast_fan(10, &mut rng).unwrap().0 as f64).collect();
        let (mean, sd) = mean_sd(&xs);
        assert!((mean - 15.5).abs() < 3.0 * sd / (reps as f64).sqrt());
        let xs: Vec<f64> = (0..reps).map(|_| xi_fast_two_hub(10, &mut rng).unwrap().1).collect();
        let (mean, sd) = mean_sd(&xs);
        assert!(mean.abs() < 3.0 * sd / (reps as f64).sqrt());
    }

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn multinomial_extremes() {
        let mut rng = replication_rng(2, 0);
        for _ in 0..100 {
            let c = multinomial(7, 4, &mut rng);
            assert_eq!(c.len(), 4);
            assert_eq!(c.iter().sum::<u64>(), 7);
        }
    }

    #[test]
    fn bernoulli_margin_makes_s_equal_xi() {
        let g = complete_bipartite(5).unwrap();
        let spec = margin_bernoulli_half();
        let mut rng = replication_rng(3, 0);
        for _ in 0..200 {
            let mut s = sample_sequence(&g, 2, &mut rng).unwrap();
            build_x_sequence(&mut s, &spec, &mut rng).unwrap();
            let xs = s.x_values.as_ref().unwrap();
            assert!(xs.iter().zip(&s.d_values).all(|(&x, &d)| x == if d { 1.0 } else { 0.0 }));
            assert_eq!(s.s_n.unwrap(), s.xi_std);
        }
        let cfg = SimulationConfig {
            ell: 2,
            replications: 500,
            seed: 4,
            fast_path: true,
            threads: Some(2),
        };
        let target = SimulationTarget::Family {
            family: Family::Bipartite,
            param: 30,
        };
        for r in simulate(&target, Some(&spec), &cfg).unwrap() {
            assert_eq!(r.s_n.unwrap(), r.xi_std);
        }
    }

    #[test]
    fn all_zero_indicators_draw_from_u() {
        let spec = margin_uniform01(4).unwrap();
        let mut s = SequenceSample {
            ell: 4,
            m_labels: vec![],
            d_values: vec![false; 1000],
            xi_count: 0,
            xi_std: 0.0,
            x_values: None,
            s_n: None,
        };
        build_x_sequence(&mut s, &spec, &mut replication_rng(0, 0)).unwrap();
        assert!(s.x_values.as_ref().unwrap().iter().all(|&x| x < 0.75));
        s.ell = 2;
        assert!(build_x_sequence(&mut s, &spec, &mut replication_rng(0, 0)).is_err());
    }

    #[test]
    fn simulate_validation() {
        let target = SimulationTarget::Family {
            family: Family::Hypercube,
            param: 3,
        };
        let mut cfg = SimulationConfig {
            ell: 2,
            replications: 10,
            seed: 1,
            fast_path: true,
            threads: Some(1),
        };
        assert!(simulate(&target, None, &cfg).is_err());
        cfg.fast_path = false;
        assert_eq!(simulate(&target, None, &cfg).unwrap().len(), 10);
        cfg.replications = 0;
        assert!(simulate(&target, None, &cfg).is_err());
        let th = SimulationTarget::Family {
            family: Family::TwoHub,
            param: 3,
        };
        let cfg = SimulationConfig {
            ell: 3,
            replications: 10,
            seed: 1,
            fast_path: true,
            threads: None,
        };
        assert!(simulate(&th, None, &cfg).is_err());
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let spec = margin_uniform01(2).unwrap();
        for (target, fast) in [
            (SimulationTarget::Graph(fan(4).unwrap()), false),
            (SimulationTarget::Graph(two_hub(9).unwrap()), true),
            (SimulationTarget::Family { family: Family::Bipartite, param: 12 }, true),
        ] {
            let mut cfg = SimulationConfig {
                ell: 2,
                replications: 300,
                seed: 99,
                fast_path: fast,
                threads: Some(1),
            };
            let a = simulate(&target, Some(&spec), &cfg).unwrap();
            cfg.threads = Some(8);
            let b = simulate(&target, Some(&spec), &cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().enumerate().all(|(i, r)| r.rep_index == i as u64));
        }
    }
}
