//! Exhaustive enumeration of vertex labelings with exact counting.
//!
//! All `ell^v` labelings are equally likely, so every probability is a count
//! over `ell^v`. Labelings are reduced to their edge-indicator bitmask first;
//! tuple checks then run over the distinct masks.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

/// Default cap on the number of enumerated labelings.
pub const ENUMERATION_CAP: u128 = 1 << 20;
/// Largest number of edges an indicator bitmask can hold.
pub const MAX_EDGES: usize = 128;
/// Largest number of K-subsets an exact check will visit.
pub const MAX_TUPLES: u128 = 20_000_000;

/// Distinct edge-indicator masks with the number of labelings producing each.
#[derive(Debug, Clone)]
pub struct IndicatorHistogram {
    pub ell: u32,
    pub edge_count: usize,
    /// `ell^v`.
    pub total: u128,
    pub masks: Vec<(u128, u64)>,
}

impl IndicatorHistogram {
    pub fn probability(&self, count: u128) -> BigRational {
        BigRational::new(BigInt::from(count), BigInt::from(self.total))
    }

    /// Number of labelings with `D_e = 1` for every `e` in `edges`.
    pub fn all_ones_count(&self, edges: &[usize]) -> u128 {
        let want = edges.iter().fold(0u128, |m, &e| m | (1u128 << e));
        self.masks
            .iter()
            .filter(|(m, _)| m & want == want)
            .map(|&(_, c)| c as u128)
            .sum()
    }
}

/// Enumerates all `ell^v` labelings of `g` (refusing beyond `cap`).
pub fn indicator_histogram(g: &Graph, ell: u32, cap: u128) -> Result<IndicatorHistogram> {
    if ell < 2 {
        return Err(Error::invalid(format!("ell must be >= 2, got {ell}")));
    }
    let v = g.vertex_count();
    let total = (ell as u128).checked_pow(v as u32).filter(|&t| t <= cap).ok_or(Error::EnumerationCap {
        states: (ell as u128).checked_pow(v as u32).unwrap_or(u128::MAX),
        cap,
    })?;
    if g.edge_count() > MAX_EDGES {
        return Err(Error::invalid(format!(
            "exact enumeration supports at most {MAX_EDGES} edges, graph has {}",
            g.edge_count()
        )));
    }
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(i, j)| (i as usize, j as usize)).collect();
    let mut labels = vec![0u32; v];
    let mut hist: HashMap<u128, u64> = HashMap::new();
    for _ in 0..total {
        let mask = edges
            .iter()
            .enumerate()
            .fold(0u128, |m, (k, &(i, j))| if labels[i] == labels[j] { m | (1 << k) } else { m });
        *hist.entry(mask).or_insert(0) += 1;
        // mixed-radix increment
        for digit in labels.iter_mut() {
            *digit += 1;
            if *digit < ell {
                break;
            }
            *digit = 0;
        }
    }
    let mut masks: Vec<(u128, u64)> = hist.into_iter().collect();
    masks.sort_unstable();
    Ok(IndicatorHistogram {
        ell,
        edge_count: g.edge_count(),
        total,
        masks,
    })
}

/// Exact pmf of `Xi_n` by exhaustive enumeration of the labels.
pub fn edge_path_pmf(g: &Graph, ell: u32) -> Result<BTreeMap<u64, BigRational>> {
    let h = indicator_histogram(g, ell, ENUMERATION_CAP)?;
    let mut counts: BTreeMap<u64, u128> = BTreeMap::new();
    for &(m, c) in &h.masks {
        *counts.entry(m.count_ones() as u64).or_insert(0) += c as u128;
    }
    Ok(counts.into_iter().map(|(k, c)| (k, h.probability(c))).collect())
}

/// Exact mean and variance of a pmf on the integers.
pub fn pmf_mean_var(pmf: &BTreeMap<u64, BigRational>) -> (BigRational, BigRational) {
    let x = |k: u64| BigRational::from_integer(BigInt::from(k));
    let mean: BigRational = pmf.iter().map(|(&k, p)| p * x(k)).sum();
    let second: BigRational = pmf.iter().map(|(&k, p)| p * x(k) * x(k)).sum();
    let var = second - &mean * &mean;
    (mean, var)
}

fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// A K-subset of edges and an outcome whose joint probability differs from
/// the product of the marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub edge_indices: Vec<usize>,
    pub edges: Vec<Edge>,
    pub outcome: Vec<u8>,
    #[serde(serialize_with = "ser_rational")]
    pub joint: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub product: BigRational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub tuple_size: usize,
    pub tuples_checked: u64,
    #[serde(serialize_with = "ser_rational")]
    pub max_abs_deviation: BigRational,
    pub independent: bool,
    pub witness: Option<Witness>,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn n_choose_k(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// Per-tuple outcome: largest deviation (numerator over `total^K`) and the
/// first violating outcome in all-ones-first order.
struct TupleResult {
    max_dev: BigInt,
    first: Option<(Vec<u8>, BigInt, BigInt)>,
}

fn check_tuple(h: &IndicatorHistogram, marg: &[u128], tuple: &[usize]) -> TupleResult {
    let k = tuple.len();
    let mut joint = vec![0u128; 1 << k];
    for &(m, c) in &h.masks {
        let mut o = 0usize;
        for (b, &e) in tuple.iter().enumerate() {
            o |= (((m >> e) & 1) as usize) << b;
        }
        joint[o] += c as u128;
    }
    if let Some(r) = compare_u128(h.total, marg, tuple, &joint) {
        return r;
    }
    let total = BigInt::from(h.total);
    let scale = total.pow(k as u32 - 1);
    let mut max_dev = BigInt::zero();
    let mut first = None;
    for o in (0..1usize << k).rev() {
        // joint / T vs prod_e f_e / T^K  <=>  joint * T^{K-1} vs prod_e f_e
        let prod = tuple.iter().enumerate().fold(BigInt::from(1), |acc, (b, &e)| {
            let f = if (o >> b) & 1 == 1 { marg[e] } else { h.total - marg[e] };
            acc * BigInt::from(f)
        });
        let lhs = BigInt::from(joint[o]) * &scale;
        let dev = (&lhs - &prod).abs();
        if !dev.is_zero() && first.is_none() {
            first = Some((outcome_bits(o, k), BigInt::from(joint[o]), prod));
        }
        if dev > max_dev {
            max_dev = dev;
        }
    }
    TupleResult { max_dev, first }
}

fn outcome_bits(o: usize, k: usize) -> Vec<u8> {
    (0..k).map(|b| ((o >> b) & 1) as u8).collect()
}

/// Same comparison in checked `u128` arithmetic; `None` on overflow.
fn compare_u128(total: u128, marg: &[u128], tuple: &[usize], joint: &[u128]) -> Option<TupleResult> {
    let k = tuple.len();
    let scale = total.checked_pow(k as u32 - 1)?;
    let mut max_dev = 0u128;
    let mut first = None;
    for o in (0..1usize << k).rev() {
        let mut prod = 1u128;
        for (b, &e) in tuple.iter().enumerate() {
            let f = if (o >> b) & 1 == 1 { marg[e] } else { total - marg[e] };
            prod = prod.checked_mul(f)?;
        }
        let lhs = joint[o].checked_mul(scale)?;
        let dev = lhs.abs_diff(prod);
        if dev != 0 && first.is_none() {
            first = Some((outcome_bits(o, k), BigInt::from(joint[o]), BigInt::from(prod)));
        }
        max_dev = max_dev.max(dev);
    }
    Some(TupleResult {
        max_dev: BigInt::from(max_dev),
        first,
    })
}

/// Exact check of K-tuplewise independence of the edge indicators: for every
/// K-subset of edges and every outcome in `{0,1}^K`, the joint probability is
/// compared with the product of the marginals as exact rationals. The
/// witness is the first violation in lexicographic tuple order, outcomes
/// scanned from all ones downwards.
pub fn exact_kwise_check(g: &Graph, ell: u32, k: usize) -> Result<IndependenceReport> {
    exact_kwise_check_capped(g, ell, k, ENUMERATION_CAP)
}

pub fn exact_kwise_check_capped(g: &Graph, ell: u32, k: usize, cap: u128) -> Result<IndependenceReport> {
    let n = g.edge_count();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("tuple size must be in 1..={n}, got {k}")));
    }
    if k > 16 {
        return Err(Error::invalid("tuple size above 16 is not supported"));
    }
    let tuples = n_choose_k(n, k);
    if tuples > MAX_TUPLES {
        return Err(Error::invalid(format!("{tuples} edge tuples exceed the limit {MAX_TUPLES}")));
    }
    let h = indicator_histogram(g, ell, cap)?;
    let marg: Vec<u128> = (0..n).map(|e| h.all_ones_count(&[e])).collect();
    let combos = combinations(n, k);
    let results: Vec<TupleResult> = combos.par_iter().map(|t| check_tuple(&h, &marg, t)).collect();
    let denom = BigInt::from(h.total).pow(k as u32);
    let max_num = results.iter().map(|r| &r.max_dev).max().cloned().unwrap_or_default();
    let witness = combos.iter().zip(&results).find_map(|(t, r)| {
        r.first.as_ref().map(|(outcome, joint, prod)| Witness {
            edge_indices: t.clone(),
            edges: t.iter().map(|&e| g.edges()[e]).collect(),
            outcome: outcome.clone(),
            joint: BigRational::new(joint.clone(), BigInt::from(h.total)),
            product: BigRational::new(prod.clone(), denom.clone()),
        })
    });
    Ok(IndependenceReport {
        tuple_size: k,
        tuples_checked: combos.len() as u64,
        independent: max_num.is_zero(),
        max_abs_deviation: BigRational::new(max_num, denom),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cage_incidence, complete_bipartite, fan, girth, hypercube, two_hub};
    use num_traits::One;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn k22_triplewise_not_fourwise() {
        let g = complete_bipartite(2).unwrap();
        let r = exact_kwise_check(&g, 2, 3).unwrap();
        assert!(r.independent && r.witness.is_none());
        assert_eq!(r.tuples_checked, 4);
        let r = exact_kwise_check(&g, 2, 4).unwrap();
        assert!(!r.independent);
        let w = r.witness.unwrap();
        assert_eq!(w.outcome, vec![1, 1, 1, 1]);
        assert_eq!((w.joint, w.product), (rat(1, 8), rat(1, 16)));
        assert_eq!(w.edges, vec![(0, 2), (0, 3), (1, 2), (1, 3)]);
    }

    #[test]
    fn single_edge_marginal() {
        let g = complete_bipartite(1).unwrap();
        for ell in [2, 3, 5] {
            let r = exact_kwise_check(&g, ell, 1).unwrap();
            assert!(r.independent);
            let h = indicator_histogram(&g, ell, ENUMERATION_CAP).unwrap();
            assert_eq!(h.probability(h.all_ones_count(&[0])), rat(1, ell as i64));
        }
    }

    #[test]
    fn cap_refuses() {
        let g = hypercube(5).unwrap();
        assert!(matches!(exact_kwise_check(&g, 2, 2), Err(Error::EnumerationCap { .. })));
        let g = complete_bipartite(2).unwrap();
        assert!(exact_kwise_check(&g, 2, 5).is_err());
        assert!(exact_kwise_check(&g, 2, 0).is_err());
    }

    #[test]
    fn enumeration_moments_are_pairwise_formulas() {
        // E[Xi] = n/ell and Var[Xi] = n (1/ell)(1 - 1/ell) exactly
        let graphs = [
            complete_bipartite(2).unwrap(),
            complete_bipartite(3).unwrap(),
            two_hub(4).unwrap(),
            two_hub(10).unwrap(),
            hypercube(3).unwrap(),
            fan(3).unwrap(),
            fan(5).unwrap(),
        ];
        for g in &graphs {
            let n = g.edge_count() as i64;
            let (mean, var) = pmf_mean_var(&edge_path_pmf(g, 2).unwrap());
            assert_eq!(mean, rat(n, 2), "{:?}", g.family());
            assert_eq!(var, rat(n, 4), "{:?}", g.family());
        }
        for g in &graphs[..2] {
            let n = g.edge_count() as i64;
            let (mean, var) = pmf_mean_var(&edge_path_pmf(g, 3).unwrap());
            assert_eq!((mean, var), (rat(n, 3), rat(2 * n, 9)));
        }
    }

    #[test]
    fn path_probabilities() {
        // k-edge path all ones with probability ell^{-k}
        let g = fan(3).unwrap();
        let h = indicator_histogram(&g, 2, ENUMERATION_CAP).unwrap();
        let idx = |e: Edge| g.edges().iter().position(|&x| x == e).unwrap();
        // M_4 - M_1 - M_0 - M_7 - M_6 (fan(3): blades (i, 3+i), last = 7)
        let path = [idx((1, 4)), idx((0, 1)), idx((0, 7)), idx((6, 7))];
        for k in 1..=4 {
            assert_eq!(h.probability(h.all_ones_count(&path[..k])), rat(1, 1 << k));
        }
        let g = complete_bipartite(2).unwrap();
        let h = indicator_histogram(&g, 3, ENUMERATION_CAP).unwrap();
        // (0,2) (1,2) (1,3): a 3-edge path
        assert_eq!(h.probability(h.all_ones_count(&[0, 2, 3])), rat(1, 27));
    }

    #[test]
    fn girth_minus_one_passes_girth_fails() {
        for g in [complete_bipartite(2).unwrap(), two_hub(3).unwrap(), fan(2).unwrap(), hypercube(3).unwrap()] {
            let gi = girth(&g).unwrap();
            assert!(exact_kwise_check(&g, 2, gi - 1).unwrap().independent);
            let r = exact_kwise_check(&g, 2, gi).unwrap();
            assert!(!r.independent);
            // the witness edges form a cycle: every endpoint has degree 2 in it
            let w = r.witness.unwrap();
            let mut deg = std::collections::HashMap::new();
            for (i, j) in w.edges {
                *deg.entry(i).or_insert(0) += 1;
                *deg.entry(j).or_insert(0) += 1;
            }
            assert!(deg.values().all(|&d| d == 2));
        }
    }

    #[test]
    fn heawood_five_but_not_six() {
        let g = cage_incidence(2).unwrap();
        let r = exact_kwise_check(&g, 2, 5).unwrap();
        assert!(r.independent);
        let r = exact_kwise_check(&g, 2, 6).unwrap();
        assert!(!r.independent);
        let w = r.witness.unwrap();
        assert_eq!(w.outcome, vec![1; 6]);
        assert_eq!((w.joint, w.product), (rat(1, 32), rat(1, 64)));
    }

    #[test]
    fn pmf_sums_to_one() {
        let p = edge_path_pmf(&cage_incidence(2).unwrap(), 2).unwrap();
        assert_eq!(p.values().sum::<BigRational>(), BigRational::one());
    }

    #[test]
    fn combinations_enumerate_lexicographically() {
        assert_eq!(combinations(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(5, 3).len() as u128, n_choose_k(5, 3));
        assert!(combinations(2, 3).is_empty());
    }
}
