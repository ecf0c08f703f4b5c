//! Streaming change detectors with on-off observation control.
//!
//! Every detector follows the same causal contract: the caller asks
//! [`Detector::wants_sample`] first, then calls [`Detector::step`] with the
//! next observation if and only if a sample was requested. Skip decisions
//! therefore depend only on observations already consumed.

mod cusum;
mod decusum;
mod fractional;
mod gcusum;
mod gdecusum;
mod spec;

pub use cusum::{Cusum, CusumState};
pub(crate) use decusum::skip_run_length;
pub use decusum::{Decusum, DecusumState};
pub use fractional::Fractional;
pub use gcusum::{ExpFamilyGcusumState, FiniteGcusumState, Gcusum, Hypothesis};
pub use gdecusum::{Gdecusum, GdecusumState};
pub use spec::{DetectorKind, DetectorSpec};

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::distributions::DistributionError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("observation supplied on a step that requested none")]
    UnexpectedSample,

    #[error("no observation supplied on a step that requested one")]
    MissingSample,

    #[error("non-finite log-likelihood ratio {0}")]
    NonFiniteLlr(f64),

    #[error("non-finite observation {0}")]
    NonFiniteObservation(f64),

    #[error("expected {expected} log-likelihood ratios, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid detector parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// What happened on one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Whether this step consumed an observation.
    pub requested_sample: bool,
    /// Detection statistic after the step.
    pub statistic: f64,
    pub stopped: bool,
}

impl StepOutcome {
    pub(crate) fn new(requested_sample: bool, statistic: f64, threshold: f64) -> Self {
        StepOutcome {
            requested_sample,
            statistic,
            stopped: statistic >= threshold,
        }
    }
}

/// Depth at which the undershoot of the control statistic is truncated.
///
/// Serialized as a number, or as the string `"inf"` for no truncation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Truncation {
    Finite(f64),
    #[default]
    Infinite,
}

impl Truncation {
    /// Lower floor applied to the control statistic (`-h`).
    #[inline]
    pub fn floor(self) -> f64 {
        match self {
            Truncation::Finite(h) => -h,
            Truncation::Infinite => f64::NEG_INFINITY,
        }
    }

    /// `(x)^{h+} = max(x, -h)`.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        x.max(self.floor())
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Truncation::Finite(_))
    }

    /// `ceil(h / mu)`, the longest possible run of skipped samples.
    pub fn max_skip_run(self, mu: f64) -> Option<u64> {
        match self {
            Truncation::Finite(h) => Some((h / mu).ceil() as u64),
            Truncation::Infinite => None,
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Finite(h) => write!(f, "{h}"),
            Truncation::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Truncation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Truncation::Finite(h) => s.serialize_f64(*h),
            Truncation::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Truncation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct TruncVisitor;
        impl Visitor<'_> for TruncVisitor {
            type Value = Truncation;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Truncation, E> {
                if v >= 0.0 && v.is_finite() {
                    Ok(Truncation::Finite(v))
                } else if v == f64::INFINITY {
                    Ok(Truncation::Infinite)
                } else {
                    Err(E::custom(format!("truncation depth must be >= 0, got {v}")))
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Truncation, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Truncation, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Truncation, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(Truncation::Infinite),
                    _ => Err(E::custom(format!("expected \"inf\", got {v:?}"))),
                }
            }
        }
        d.deserialize_any(TruncVisitor)
    }
}

/// Observation pattern of the fractional-sampling baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum SkipPattern {
    /// Keep steps 1, 1 + period, 1 + 2 * period, ...
    Periodic { period: u32 },
    /// Keep each step independently with probability `keep_probability`.
    Bernoulli { keep_probability: f64 },
}

impl Default for SkipPattern {
    fn default() -> Self {
        SkipPattern::Periodic { period: 2 }
    }
}

/// Tuning shared by all detectors. Fields a detector does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Stopping threshold `A`.
    pub threshold: f64,
    /// Ramp rate of the control statistic while skipping.
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Undershoot truncation depth.
    #[serde(default)]
    pub h: Truncation,
    /// Cap on the number of start hypotheses of the exponential-family GLR.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_pattern: Option<SkipPattern>,
}

fn default_mu() -> f64 {
    1.0
}

impl DetectorParams {
    pub fn new(threshold: f64) -> Self {
        DetectorParams {
            threshold,
            mu: default_mu(),
            h: Truncation::Infinite,
            window: None,
            skip_pattern: None,
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_h(mut self, h: Truncation) -> Self {
        self.h = h;
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_skip_pattern(mut self, pattern: SkipPattern) -> Self {
        self.skip_pattern = Some(pattern);
        self
    }

    pub(crate) fn check_threshold(&self, strictly_positive: bool) -> Result<(), DetectorError> {
        let a = self.threshold;
        if a.is_nan() || a < 0.0 || (strictly_positive && a == 0.0) {
            let need = if strictly_positive { "> 0" } else { ">= 0" };
            return Err(DetectorError::InvalidParams(format!(
                "threshold must be {need}, got {a}"
            )));
        }
        Ok(())
    }

    pub(crate) fn check_control(&self) -> Result<(), DetectorError> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(DetectorError::InvalidParams(format!(
                "mu must be finite and > 0, got {}",
                self.mu
            )));
        }
        if let Truncation::Finite(h) = self.h {
            if !(h >= 0.0) || !h.is_finite() {
                return Err(DetectorError::InvalidParams(format!(
                    "h must be >= 0, got {h}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn check_window(&self) -> Result<(), DetectorError> {
        if self.window == Some(0) {
            return Err(DetectorError::InvalidParams("window must be >= 1".into()));
        }
        Ok(())
    }
}

/// A sequential detector driven one time step at a time.
pub trait Detector {
    /// Whether the next step should be given an observation.
    fn wants_sample(&self) -> bool;

    /// Advance one time step. `observation` must be `Some` exactly when
    /// [`wants_sample`](Detector::wants_sample) returned `true`.
    fn step(&mut self, observation: Option<f64>) -> Result<StepOutcome, DetectorError>;

    /// Current detection statistic.
    fn statistic(&self) -> f64;

    /// Return to the initial state.
    fn reset(&mut self);
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn wants_sample(&self) -> bool {
        (**self).wants_sample()
    }
    fn step(&mut self, observation: Option<f64>) -> Result<StepOutcome, DetectorError> {
        (**self).step(observation)
    }
    fn statistic(&self) -> f64 {
        (**self).statistic()
    }
    fn reset(&mut self) {
        (**self).reset()
    }
}

/// Checks the sampling contract and unwraps a finite observation.
pub(crate) fn expect_sample(observation: Option<f64>) -> Result<f64, DetectorError> {
    match observation {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(DetectorError::NonFiniteObservation(x)),
        None => Err(DetectorError::MissingSample),
    }
}

pub(crate) fn expect_no_sample(observation: Option<f64>) -> Result<(), DetectorError> {
    match observation {
        Some(_) => Err(DetectorError::UnexpectedSample),
        None => Ok(()),
    }
}
