//! Graph-based K-tuplewise independent sequences with arbitrary margins.
//!
//! Uniform labels are placed on the vertices of a graph; every edge carries
//! the indicator that its two endpoint labels agree. With a girth of at least
//! `K + 1` those indicators are K-tuplewise (but not mutually) independent, and
//! mixing two truncated parts of a margin according to the indicators yields a
//! sequence with that margin. The crate generates the graphs, samples the
//! sequences, evaluates the limiting laws of the standardized sample mean and
//! checks independence and convergence, exactly where enumeration allows and
//! statistically otherwise.
//!
//! Numeric kernels in [`limit_laws`] and [`quadrature`] are generic over the
//! float type ([`Real`]); the aliases below fix them to `f64`.

pub mod error;
pub mod experiment;
pub mod graph;
pub mod limit_laws;
pub mod margins;
pub mod quadrature;
pub mod sampler;
pub mod scalar;
pub mod stats_tests;

pub use error::{Error, Result};
pub use experiment::{preset, run_experiment, ExperimentConfig, LawSpec};
pub use graph::{Family, Graph};
pub use margins::MarginSpec;
pub use sampler::{simulate, SequenceSample, SimRecord, SimulationConfig, SimulationTarget};
pub use scalar::Real;

/// Limiting law over `f64`.
pub type LimitLaw = limit_laws::LimitLaw<f64>;
/// Tabulated pdf/cdf over `f64`.
pub type LawTable = limit_laws::LawTable<f64>;
/// Grid specification over `f64`.
pub type Grid = limit_laws::Grid<f64>;
/// Quadrature estimate over `f64`.
pub type Estimate = quadrature::Estimate<f64>;
