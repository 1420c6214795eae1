//! Exact and statistical checks: K-wise independence by enumeration or by
//! sampling, goodness of fit against the limit laws, moment comparisons and
//! calibration of the tests themselves.

pub mod calibration;
pub mod exact;
pub mod gof;
pub mod moments;
pub mod sampled;

pub use calibration::{calibrate, CalibrationReport};
pub use exact::{exact_kwise_check, IndependenceReport, Witness};
pub use gof::{anderson_darling_normal, ks_statistic, pearson_chi2, two_sample_ks, GofReport, GofTest, ReferenceCdf};
pub use moments::{moment_suite, MomentReport};
pub use sampled::{test_kwise_sampled, test_kwise_tuples, SampledConfig, SampledReport};
