//! Statistical K-wise independence check on graphs too large to enumerate.
//!
//! Every replication draws a fresh labeling; for each selected K-tuple of
//! edges the `2^K` joint outcomes are counted and compared with the product
//! of the empirical marginals by a chi-square contingency test.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::sampler::{draw_labels, replication_rng, with_pool};
use crate::scalar::chi2_sf;

/// Largest tuple size (`2^K` cells per tuple).
pub const MAX_SAMPLED_K: usize = 12;
/// Stream index reserved for drawing the tuples.
pub const TUPLE_STREAM: u64 = u64::MAX;
const BLOCK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledConfig {
    pub ell: u32,
    pub tuple_size: usize,
    pub reps: u64,
    pub seed: u64,
    /// Family-wise level; each tuple is tested at `alpha / tuples`.
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleTest {
    pub edge_indices: Vec<usize>,
    pub edges: Vec<Edge>,
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledReport {
    pub tuple_size: usize,
    pub tuples_tested: u64,
    pub reps: u64,
    pub alpha: f64,
    pub per_tuple_alpha: f64,
    pub rejected: u64,
    pub rejected_fraction: f64,
    pub min_p_value: f64,
    pub tuples: Vec<TupleTest>,
}

fn validate(g: &Graph, cfg: &SampledConfig) -> Result<()> {
    if cfg.ell < 2 {
        return Err(Error::invalid(format!("ell must be >= 2, got {}", cfg.ell)));
    }
    if cfg.reps == 0 {
        return Err(Error::invalid("reps must be >= 1"));
    }
    if cfg.tuple_size == 0 || cfg.tuple_size > MAX_SAMPLED_K {
        return Err(Error::invalid(format!("tuple size must be in 1..={MAX_SAMPLED_K}")));
    }
    if cfg.tuple_size > g.edge_count() {
        return Err(Error::invalid(format!(
            "tuple size {} exceeds the edge count {}",
            cfg.tuple_size,
            g.edge_count()
        )));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    Ok(())
}

/// Draws `count` K-subsets of edges uniformly (sorted indices) from the
/// tuple stream of `seed`.
pub fn sample_tuples(edge_count: usize, k: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = replication_rng(seed, TUPLE_STREAM);
    (0..count)
        .map(|_| {
            let mut t = index::sample(&mut rng, edge_count, k).into_vec();
            t.sort_unstable();
            t
        })
        .collect()
}

/// Pearson statistic of joint counts against the product of the empirical
/// marginals; `2^K - K - 1` degrees of freedom.
pub fn independence_chi2(counts: &[u64], k: usize) -> (f64, u64) {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    let ones: Vec<f64> = (0..k)
        .map(|b| counts.iter().enumerate().filter(|(o, _)| o >> b & 1 == 1).map(|(_, &c)| c).sum::<u64>() as f64 / nf)
        .collect();
    let mut stat = 0.0;
    for (o, &c) in counts.iter().enumerate() {
        let p: f64 = (0..k).map(|b| if o >> b & 1 == 1 { ones[b] } else { 1.0 - ones[b] }).product();
        let e = nf * p;
        if e > 0.0 {
            stat += (c as f64 - e).powi(2) / e;
        } else if c > 0 {
            stat = f64::INFINITY;
        }
    }
    (stat, (1u64 << k) - k as u64 - 1)
}

/// Tests the given tuples (edge indices) over `cfg.reps` labelings.
pub fn test_kwise_tuples(g: &Graph, tuples: &[Vec<usize>], cfg: &SampledConfig) -> Result<SampledReport> {
    validate(g, cfg)?;
    if tuples.is_empty() {
        return Err(Error::invalid("at least one tuple is required"));
    }
    for t in tuples {
        if t.len() != cfg.tuple_size || t.iter().any(|&e| e >= g.edge_count()) {
            return Err(Error::invalid(format!("tuple {t:?} is not a {}-subset of the edges", cfg.tuple_size)));
        }
    }
    let k = cfg.tuple_size;
    let cells = 1usize << k;
    let edges = g.edges();
    let blocks = cfg.reps.div_ceil(BLOCK);
    let count_block = |b: u64| -> Result<Vec<u64>> {
        let mut counts = vec![0u64; tuples.len() * cells];
        for rep in b * BLOCK..((b + 1) * BLOCK).min(cfg.reps) {
            let mut rng = replication_rng(cfg.seed, rep);
            let labels = draw_labels(g, cfg.ell, &mut rng)?;
            for (ti, t) in tuples.iter().enumerate() {
                let o = t.iter().enumerate().fold(0usize, |o, (b, &e)| {
                    let (i, j) = edges[e];
                    o | usize::from(labels[i as usize] == labels[j as usize]) << b
                });
                counts[ti * cells + o] += 1;
            }
        }
        Ok(counts)
    };
    let counts = with_pool(cfg.threads, || {
        (0..blocks)
            .into_par_iter()
            .map(count_block)
            .try_reduce(
                || vec![0u64; tuples.len() * cells],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )
    })??;
    let per_tuple_alpha = cfg.alpha / tuples.len() as f64;
    let results: Vec<TupleTest> = tuples
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let (statistic, dof) = independence_chi2(&counts[ti * cells..(ti + 1) * cells], k);
            let p_value = if dof == 0 { 1.0 } else { chi2_sf(statistic, dof as f64) };
            TupleTest {
                edge_indices: t.clone(),
                edges: t.iter().map(|&e| edges[e]).collect(),
                statistic,
                dof,
                p_value,
                rejected: p_value < per_tuple_alpha,
            }
        })
        .collect();
    let rejected = results.iter().filter(|t| t.rejected).count() as u64;
    Ok(SampledReport {
        tuple_size: k,
        tuples_tested: results.len() as u64,
        reps: cfg.reps,
        alpha: cfg.alpha,
        per_tuple_alpha,
        rejected,
        rejected_fraction: rejected as f64 / results.len() as f64,
        min_p_value: results.iter().map(|t| t.p_value).fold(1.0, f64::min),
        tuples: results,
    })
}

/// Samples `tuples` K-subsets uniformly and tests each at a Bonferroni level.
pub fn test_kwise_sampled(g: &Graph, tuples: usize, cfg: &SampledConfig) -> Result<SampledReport> {
    validate(g, cfg)?;
    if tuples == 0 {
        return Err(Error::invalid("tuples must be >= 1"));
    }
    let chosen = sample_tuples(g.edge_count(), cfg.tuple_size, tuples, cfg.seed);
    test_kwise_tuples(g, &chosen, cfg)
}
