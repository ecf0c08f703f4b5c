//! Pre- and post-change density models, log-likelihood ratios, divergences,
//! and the least-favorable-distribution check.

mod density;
mod family;
mod glr;

pub(crate) use density::Welford;
pub use density::{kl, llr, BaseFamily, Density, Estimate, LlrFn};
pub use family::{
    check_least_favorable, control_drift, DriftReport, FamilySpec, MemberDrift, PostChange,
    ThetaStar, INTERVAL_DRIFT_PROBES, MIN_DRIFT_SAMPLES,
};
pub(crate) use glr::glr_sup_on;
pub use glr::{glr_sup, ExponentialFamilySpec, GlrMax, GOLDEN_TOLERANCE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("log-density of {density} is not finite at x = {x}")]
    NonFiniteLogDensity { density: String, x: f64 },

    #[error("log-likelihood ratio is not finite at x = {x}")]
    NonFiniteLlr { x: f64 },

    #[error("divergent Monte Carlo estimate")]
    Divergent,

    #[error("sample count {got} below minimum {min}")]
    InvalidSampleCount { got: usize, min: usize },

    #[error("invalid parameter interval [{lower}, {upper}]: need 0 < lower < upper")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("invalid exclusion radius {0}")]
    InvalidEpsilon(f64),

    #[error("exclusion radius {epsilon} leaves no parameter below {upper}")]
    EmptyInterval { epsilon: f64, upper: f64 },

    #[error("log-partition function does not vanish at zero")]
    LogPartitionNotNormalized,

    #[error("log-partition function is not convex near theta = {theta}")]
    NonConvexLogPartition { theta: f64 },

    #[error("hypothesis with zero observations")]
    EmptyHypothesis,

    #[error("post-change family is empty")]
    EmptyFamily,

    #[error("least favorable parameter {0} is not in the family")]
    ThetaStarOutOfRange(f64),

    #[error("post-change member {0} is indistinguishable from the pre-change law")]
    IndistinguishableMember(String),

    #[error("no divergence available between {num} and {den}")]
    UnsupportedPair { num: String, den: String },
}
