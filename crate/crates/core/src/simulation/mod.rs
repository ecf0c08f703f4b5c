//! Monte Carlo estimation of false alarm rate, detection delay and
//! pre-change duty cycle.
//!
//! Trial `i` of a run draws from its own stream of a counter-based
//! generator, so every estimate is a pure function of the seed and the
//! configuration, whatever the number of worker threads.

mod curve;
mod engine;
mod estimators;
pub mod rng;
mod trial;

pub use curve::{detector_pdc, tradeoff_curve, tradeoff_curve_with, CurveConfig, MetricsReport};
pub use engine::Engine;
pub use estimators::{
    cadd_probes, conditional_delay, delay_gap_bound, estimate_cadd, estimate_far,
    estimate_pdc_longrun, estimate_pdc_renewal, estimate_q_theta, far_horizon, lower_bound,
    pdc_bound, walk_survival, CaddEstimate, CaddPoint, FarEstimate, Interval, PdcEstimate,
    PdcMethod, SurvivalEstimate, CENSORING_FLAG_RATE, CYCLE_CAP, DEFAULT_GAMMA_GRID,
    MIN_LONGRUN_HORIZON, MIN_SURVIVAL_HORIZON, MIN_SURVIVORS, MIN_TRIALS, Z95,
};
pub use trial::{run_trial, run_trial_indexed, ChangePoint, TrialConfig, TrialResult};

use thiserror::Error;

use crate::detectors::DetectorError;
use crate::distributions::DistributionError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Detector(#[from] DetectorError),

    #[error(transparent)]
    Distribution(#[from] DistributionError),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("a post-change density is required")]
    MissingPostChange,

    #[error("all {trials} trials were censored")]
    AllCensored { trials: u64 },

    #[error("only {surviving} paths without false alarm at change point {change}, need {min}")]
    TooFewSurvivors {
        change: String,
        surviving: u64,
        min: u64,
    },

    #[error(
        "a renewal cycle exceeded {cap} steps; the control statistic may not drift down under f_0"
    )]
    CycleCap { cap: u64 },

    #[error("least-favorable assumption violated: {0}")]
    AssumptionViolated(String),
}
