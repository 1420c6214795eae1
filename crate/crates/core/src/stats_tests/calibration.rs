//! Null calibration: draw p-values under a null and compare their empirical
//! distribution with the uniform law through a DKW band.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::with_pool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub trials: u64,
    pub alpha: f64,
    /// DKW half-width `sqrt(ln(2/alpha) / (2 trials))`.
    pub band: f64,
    /// `sup_t (ecdf(t) - t)`; positive values mean p-values too small.
    pub max_excess: f64,
    /// `sup_t (t - ecdf(t))`; conservative tests have a large deficit.
    pub max_deficit: f64,
    pub superuniform: bool,
}

pub fn dkw_band(trials: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * trials as f64)).sqrt()
}

/// Band check of an already computed set of p-values.
pub fn check_p_values(p_values: &[f64], alpha: f64) -> Result<CalibrationReport> {
    if p_values.is_empty() {
        return Err(Error::invalid("no p-values"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("p-values must lie in [0, 1]"));
    }
    let mut ps = p_values.to_vec();
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    let (mut excess, mut deficit) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < ps.len() {
        let t = ps[i];
        let mut j = i;
        while j < ps.len() && ps[j] == t {
            j += 1;
        }
        // just below t the ecdf is i/n, at t it is j/n
        excess = excess.max(j as f64 / n - t);
        deficit = deficit.max(t - i as f64 / n);
        i = j;
    }
    deficit = deficit.max(0.0);
    let band = dkw_band(ps.len() as u64, alpha);
    Ok(CalibrationReport {
        trials: ps.len() as u64,
        alpha,
        band,
        max_excess: excess,
        max_deficit: deficit,
        superuniform: excess <= band,
    })
}

/// Runs `trial(i)` for `i in 0..trials` in parallel and checks the p-values.
pub fn calibrate<F>(trials: u64, alpha: f64, threads: Option<usize>, trial: F) -> Result<CalibrationReport>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let ps = with_pool(threads, || (0..trials).into_par_iter().map(&trial).collect::<Result<Vec<f64>>>())??;
    check_p_values(&ps, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_bipartite, two_hub};
    use crate::sampler::{replication_rng, simulate, SimulationConfig, SimulationTarget};
    use crate::stats_tests::gof::{anderson_darling_normal, ks_statistic, pearson_chi2, two_sample_ks, ReferenceCdf};
    use crate::stats_tests::sampled::{test_kwise_tuples, SampledConfig};
    use rand_distr::{Distribution, StandardNormal};

    const TRIALS: u64 = 1000;
    const ALPHA: f64 = 0.001;

    fn normals(trial: u64, salt: u64, n: usize) -> Vec<f64> {
        let mut rng = replication_rng(salt, trial);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn band_formula_and_uniform_grid() {
        assert!((dkw_band(1000, 0.05) - 0.042_946_940_834_673_76).abs() < 1e-14);
        let ps: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = check_p_values(&ps, ALPHA).unwrap();
        assert!((r.max_excess - 0.0005).abs() < 1e-12 && r.superuniform);
        // anti-conservative: every p-value halved
        let half: Vec<f64> = ps.iter().map(|p| p / 2.0).collect();
        assert!(!check_p_values(&half, ALPHA).unwrap().superuniform);
        assert!(check_p_values(&[1.5], ALPHA).is_err());
    }

    #[test]
    fn ks_calibrated() {
        let g = ReferenceCdf::gaussian();
        let r = calibrate(TRIALS, ALPHA, None, |t| Ok(ks_statistic(&normals(t, 1, 500), &g)?.p_value)).unwrap();
        assert!(r.superuniform, "{r:?}");
    }

    #[test]
    fn ad_calibrated() {
        let r = calibrate(TRIALS, ALPHA, None, |t| Ok(anderson_darling_normal(&normals(t, 2, 500))?.p_value)).unwrap();
        assert!(r.superuniform, "{r:?}");
        assert!(r.max_deficit <= r.band, "{r:?}");
    }

    #[test]
    fn chi2_calibrated() {
        let g = ReferenceCdf::gaussian();
        let r = calibrate(TRIALS, ALPHA, None, |t| Ok(pearson_chi2(&normals(t, 3, 500), &g, None)?.p_value)).unwrap();
        assert!(r.superuniform, "{r:?}");
    }

    #[test]
    fn two_sample_ks_calibrated() {
        let r = calibrate(TRIALS, ALPHA, None, |t| {
            Ok(two_sample_ks(&normals(t, 4, 300), &normals(t, 5, 400))?.p_value)
        })
        .unwrap();
        assert!(r.superuniform, "{r:?}");
    }

    #[test]
    fn fast_and_edge_paths_agree() {
        // same law through two routes; p-values are superuniform on a lattice
        let r = calibrate(200, ALPHA, None, |t| {
            let target = SimulationTarget::Family { family: crate::graph::Family::TwoHub, param: 10 };
            let mut cfg = SimulationConfig { ell: 2, replications: 300, seed: t, fast_path: true, threads: Some(1) };
            let fast: Vec<f64> = simulate(&target, None, &cfg)?.iter().map(|r| r.xi_std).collect();
            cfg.fast_path = false;
            cfg.seed = t + 1_000_000;
            let slow: Vec<f64> = simulate(&SimulationTarget::Graph(two_hub(10)?), None, &cfg)?
                .iter()
                .map(|r| r.xi_std)
                .collect();
            Ok(two_sample_ks(&fast, &slow)?.p_value)
        })
        .unwrap();
        assert!(r.superuniform, "{r:?}");
    }

    #[test]
    fn sampled_kwise_calibrated() {
        // triples of K_{2,2} are independent (girth 4)
        let g = complete_bipartite(2).unwrap();
        let r = calibrate(TRIALS, ALPHA, None, |t| {
            let cfg = SampledConfig { ell: 2, tuple_size: 3, reps: 400, seed: t, alpha: 0.01, threads: Some(1) };
            Ok(test_kwise_tuples(&g, &[vec![0, 1, 2]], &cfg)?.tuples[0].p_value)
        })
        .unwrap();
        assert!(r.superuniform, "{r:?}");
    }
}
