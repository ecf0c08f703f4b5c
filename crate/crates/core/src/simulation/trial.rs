use std::fmt;

use serde::{Deserialize, Serialize};

use super::rng::{derive_seed, stream_rng, Purpose};
use super::SimulationError;
use crate::detectors::DetectorSpec;
use crate::distributions::{Density, FamilySpec};

/// When the observations switch from `f_0` to the post-change law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangePoint {
    /// Observation `gamma` (1-based) is the first post-change one.
    At(u64),
    Never,
    /// The change hits the first step `n >= not_before` on which a skip run
    /// starts, i.e. the detector sampled at `n - 1` and declines at `n`.
    /// Chosen from the past only, so it is a legitimate adversarial start.
    SkipBoundary {
        not_before: u64,
    },
}

impl fmt::Display for ChangePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChangePoint::At(g) => write!(f, "{g}"),
            ChangePoint::Never => f.write_str("inf"),
            ChangePoint::SkipBoundary { not_before } => write!(f, "skip>={not_before}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub family: FamilySpec,
    pub detector: DetectorSpec,
    pub change: ChangePoint,
    /// Post-change law; unused when the change never happens.
    pub theta_true: Option<Density>,
    /// Censoring cap on the stopping time.
    pub horizon: u64,
    pub seed: u64,
}

impl TrialConfig {
    pub fn new(family: FamilySpec, detector: DetectorSpec, seed: u64) -> Self {
        TrialConfig {
            family,
            detector,
            change: ChangePoint::Never,
            theta_true: None,
            horizon: 100_000,
            seed,
        }
    }

    pub fn with_change(mut self, change: ChangePoint, theta_true: Density) -> Self {
        self.change = change;
        self.theta_true = Some(theta_true);
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.detector.params.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.horizon == 0 {
            return Err(SimulationError::InvalidArgument(
                "horizon must be >= 1".into(),
            ));
        }
        match self.change {
            ChangePoint::At(0) => Err(SimulationError::InvalidArgument(
                "change point must be >= 1".into(),
            )),
            ChangePoint::Never => Ok(()),
            _ if self.theta_true.is_none() => Err(SimulationError::MissingPostChange),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Stopping time, or the horizon when censored.
    pub tau: u64,
    pub censored: bool,
    /// Realized change point; `None` if the change never happened before stopping.
    pub change_point: Option<u64>,
    /// Observations consumed at steps `n < gamma`, `n <= tau`.
    pub pre_change_samples_used: u64,
    /// `min(gamma - 1, tau)`.
    pub steps_before_change: u64,
    pub samples_used: u64,
}

impl TrialResult {
    /// `tau - gamma` when the change happened at or before the stop.
    pub fn delay(&self) -> Option<u64> {
        self.change_point
            .filter(|&g| self.tau >= g)
            .map(|g| self.tau - g)
    }
}

/// Trial 0 of `cfg`.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialResult, SimulationError> {
    run_trial_indexed(cfg, 0)
}

/// Trial `index` of `cfg`. Draws one observation per time step whether or
/// not the detector consumes it.
pub fn run_trial_indexed(cfg: &TrialConfig, index: u64) -> Result<TrialResult, SimulationError> {
    cfg.validate()?;
    let mut rng = stream_rng(derive_seed(cfg.seed, Purpose::Observations, 0), index);
    let coin = (derive_seed(cfg.seed, Purpose::Coin, 0), index);
    let mut det = cfg.detector.build(&cfg.family, coin)?;
    let pre = *cfg.family.pre();
    let post = cfg.theta_true.unwrap_or(pre);

    let mut gamma = match cfg.change {
        ChangePoint::At(g) => Some(g),
        _ => None,
    };
    let mut prev_sampled = false;
    let mut pre_samples = 0;
    let mut samples = 0;
    let mut tau = None;
    for n in 1..=cfg.horizon {
        let wants = det.wants_sample();
        if let ChangePoint::SkipBoundary { not_before } = cfg.change {
            if gamma.is_none() && n >= not_before && prev_sampled && !wants {
                gamma = Some(n);
            }
        }
        let post_change = gamma.is_some_and(|g| n >= g);
        let x = if post_change {
            post.sample(&mut rng)
        } else {
            pre.sample(&mut rng)
        };
        let out = det.step(wants.then_some(x))?;
        if wants {
            samples += 1;
            if !post_change {
                pre_samples += 1;
            }
        }
        prev_sampled = wants;
        if out.stopped {
            tau = Some(n);
            break;
        }
    }
    let (tau, censored) = match tau {
        Some(t) => (t, false),
        None => (cfg.horizon, true),
    };
    Ok(TrialResult {
        tau,
        censored,
        change_point: gamma,
        pre_change_samples_used: pre_samples,
        steps_before_change: gamma.map_or(tau, |g| (g - 1).min(tau)),
        samples_used: samples,
    })
}
