//! Sample moments 1-4 against the moments of a limit law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::LimitLaw;

/// Smallest sample accepted by [`moment_suite`].
pub const MIN_MOMENT_SAMPLES: usize = 10_000;
/// `|z|` above which a moment is flagged.
pub const Z_FLAG: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub order: u32,
    pub sample: f64,
    pub law: f64,
    pub std_error: f64,
    pub z: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub reference_law: String,
    pub sample_size: u64,
    pub entries: Vec<MomentEntry>,
    pub all_within: bool,
}

impl MomentReport {
    pub fn entry(&self, order: u32) -> Option<&MomentEntry> {
        self.entries.iter().find(|e| e.order == order)
    }
}

/// Raw moments `E[X^k]`, `k = 1..4`, compared with `law.moments()`. The
/// standard error of moment `k` is the sample standard deviation of `x^k`
/// over `sqrt(n)`.
pub fn moment_suite(samples: &[f64], law: &LimitLaw) -> Result<MomentReport> {
    let n = samples.len();
    if n < MIN_MOMENT_SAMPLES {
        return Err(Error::invalid(format!(
            "moment comparison needs at least {MIN_MOMENT_SAMPLES} samples, got {n}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let nf = n as f64;
    let target = law.moments();
    let entries = (1..=4u32)
        .map(|k| {
            let powers = samples.iter().map(|&x| x.powi(k as i32));
            let mean = powers.clone().sum::<f64>() / nf;
            let var = powers.map(|p| (p - mean) * (p - mean)).sum::<f64>() / (nf - 1.0);
            let se = (var / nf).sqrt();
            let law_k = target[k as usize - 1];
            let diff = mean - law_k;
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            MomentEntry {
                order: k,
                sample: mean,
                law: law_k,
                std_error: se,
                z,
                flagged: !(z.abs() <= Z_FLAG),
            }
        })
        .collect::<Vec<_>>();
    Ok(MomentReport {
        reference_law: law.label(),
        sample_size: n as u64,
        all_within: entries.iter().all(|e| !e.flagged),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::replication_rng;

    fn draws(law: &LimitLaw, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = replication_rng(seed, 0);
        (0..n).map(|_| law.sample(&mut rng)).collect()
    }

    #[test]
    fn gaussian_null() {
        let g = LimitLaw::gaussian();
        let r = moment_suite(&draws(&g, 200_000, 3), &g).unwrap();
        assert!(r.all_within, "{r:?}");
        assert_eq!(r.entry(4).unwrap().law, 3.0);
    }

    #[test]
    fn s_limit_fourth_moment_at_r_one() {
        // 6 r^4 / (ell - 1) + 3 at ell = 2, r = 1
        let law = LimitLaw::s_limit(2, 1.0).unwrap();
        assert!((law.moments()[3] - 9.0).abs() < 1e-12);
        let r = moment_suite(&draws(&law, 1_000_000, 4), &law).unwrap();
        assert!(r.entry(4).unwrap().z.abs() <= 4.0, "{r:?}");
    }

    #[test]
    fn mixture_fourth_moment_at_r_one() {
        let law = LimitLaw::mixture_two_hub(1.0).unwrap();
        assert!((law.moments()[3] - 6.0).abs() < 1e-12);
        let r = moment_suite(&draws(&law, 200_000, 5), &law).unwrap();
        assert!(r.all_within, "{r:?}");
    }

    #[test]
    fn flags_wrong_law() {
        let law = LimitLaw::s_limit(2, 1.0).unwrap();
        let r = moment_suite(&draws(&law, 200_000, 6), &LimitLaw::gaussian()).unwrap();
        assert!(r.entry(4).unwrap().flagged);
        assert!(!r.all_within);
    }

    #[test]
    fn small_or_bad_input() {
        let g = LimitLaw::gaussian();
        assert!(moment_suite(&[0.0; 10], &g).is_err());
        let mut xs = draws(&g, 10_000, 1);
        xs[0] = f64::NAN;
        assert!(moment_suite(&xs, &g).is_err());
        // constant zero: odd moments match with zero spread
        let r = moment_suite(&vec![0.0; 10_000], &g).unwrap();
        assert_eq!(r.entry(1).unwrap().z, 0.0);
        assert!(r.entry(2).unwrap().flagged);
    }
}
