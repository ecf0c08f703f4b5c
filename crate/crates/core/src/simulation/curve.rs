use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::estimators::{
    delay_gap_bound, estimate_cadd, estimate_far, estimate_pdc_longrun, estimate_pdc_renewal,
    estimate_q_theta, far_horizon, CaddEstimate, FarEstimate, PdcEstimate, SurvivalEstimate,
    DEFAULT_GAMMA_GRID, MIN_LONGRUN_HORIZON,
};
use super::trial::{ChangePoint, TrialConfig};
use super::SimulationError;
use crate::detectors::{DetectorKind, DetectorSpec};
use crate::distributions::{Density, FamilySpec};

/// Everything a trade-off sweep needs apart from the thresholds.
#[derive(Debug, Clone)]
pub struct CurveConfig {
    pub family: FamilySpec,
    pub detector: DetectorSpec,
    pub theta_true: Density,
    pub gamma_grid: Vec<u64>,
    pub far_trials: u64,
    /// Trials per change-point probe.
    pub cadd_trials: u64,
    pub pdc_cycles: u64,
    pub longrun_trials: u64,
    pub longrun_horizon: u64,
    /// Walks for `q_theta`; zero skips the delay-gap bound.
    pub q_trials: u64,
    pub q_horizon: u64,
    /// Censoring cap; `None` uses `far_horizon(A)` per threshold.
    pub horizon: Option<u64>,
    pub seed: u64,
}

impl CurveConfig {
    pub fn new(family: FamilySpec, detector: DetectorSpec, theta_true: Density, seed: u64) -> Self {
        CurveConfig {
            family,
            detector,
            theta_true,
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            far_trials: 20_000,
            cadd_trials: 4_000,
            pdc_cycles: 200_000,
            longrun_trials: 200,
            longrun_horizon: MIN_LONGRUN_HORIZON,
            q_trials: 0,
            q_horizon: 10_000,
            horizon: None,
            seed,
        }
    }

    /// Trial configuration at threshold `a`. Every threshold shares the
    /// same observation streams.
    pub fn trial(&self, a: f64) -> TrialConfig {
        TrialConfig {
            family: self.family.clone(),
            detector: self.detector.clone().with_threshold(a),
            change: ChangePoint::Never,
            theta_true: Some(self.theta_true),
            horizon: self.horizon.unwrap_or_else(|| far_horizon(a)),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub detector: DetectorKind,
    pub theta_true: Density,
    pub threshold: f64,
    pub far: FarEstimate,
    pub cadd: CaddEstimate,
    /// Worst conditional delay over all change-point probes. The worst case
    /// over histories cannot be certified by simulation.
    pub wadd_proxy: f64,
    /// Analytic bound on the extra worst-case delay from skipping, when `h` is finite.
    pub gap_bound: Option<f64>,
    pub q_theta: Option<SurvivalEstimate>,
    pub pdc: PdcEstimate,
    pub trials: u64,
    pub censoring_rate: f64,
    pub seed: u64,
}

/// Duty cycle of the configured detector, which does not depend on `A`.
///
/// Data-efficient detectors use the renewal-reward estimator on the density
/// driving their skips; everything else uses the long-run fraction.
pub fn detector_pdc(cfg: &CurveConfig, engine: &Engine) -> Result<PdcEstimate, SimulationError> {
    match cfg.detector.kind {
        DetectorKind::Decusum | DetectorKind::Gdecusum => {
            let family = match (cfg.detector.kind, cfg.detector.target) {
                (DetectorKind::Decusum, Some(t)) => cfg.family.clone().with_control(t),
                _ => cfg.family.clone(),
            };
            estimate_pdc_renewal(
                &family,
                &cfg.detector.params,
                cfg.pdc_cycles,
                cfg.seed,
                engine,
            )
        }
        _ => estimate_pdc_longrun(
            &cfg.trial(f64::INFINITY),
            cfg.longrun_horizon,
            cfg.longrun_trials,
            engine,
        ),
    }
}

fn gap_bound(
    cfg: &CurveConfig,
    engine: &Engine,
) -> Result<Option<(SurvivalEstimate, f64)>, SimulationError> {
    let p = &cfg.detector.params;
    if cfg.q_trials == 0 || cfg.detector.kind != DetectorKind::Gdecusum || !p.h.is_finite() {
        return Ok(None);
    }
    let q = estimate_q_theta(
        &cfg.family,
        &cfg.theta_true,
        cfg.q_trials,
        cfg.q_horizon,
        cfg.seed,
        engine,
    )?;
    if q.value == 0.0 {
        return Ok(None);
    }
    Ok(Some((q, delay_gap_bound(q.value, p.h, p.mu)?)))
}

/// FAR, CADD and PDC of one detector at each threshold, in threshold order.
pub fn tradeoff_curve(
    cfg: &CurveConfig,
    thresholds: &[f64],
    engine: &Engine,
) -> Result<Vec<MetricsReport>, SimulationError> {
    tradeoff_curve_with(cfg, thresholds, engine, |_, _| {})
}

/// [`tradeoff_curve`] with a callback after each finished threshold.
pub fn tradeoff_curve_with<F: FnMut(usize, &MetricsReport)>(
    cfg: &CurveConfig,
    thresholds: &[f64],
    engine: &Engine,
    mut progress: F,
) -> Result<Vec<MetricsReport>, SimulationError> {
    if thresholds.is_empty() {
        return Err(SimulationError::InvalidArgument("no thresholds".into()));
    }
    if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SimulationError::InvalidArgument(
            "thresholds must be strictly increasing".into(),
        ));
    }
    let pdc = detector_pdc(cfg, engine)?;
    let gap = gap_bound(cfg, engine)?;
    let mut rows = Vec::with_capacity(thresholds.len());
    for (i, &a) in thresholds.iter().enumerate() {
        let trial = cfg.trial(a);
        let far = estimate_far(&trial, cfg.far_trials, engine)?;
        let cadd = estimate_cadd(&trial, &cfg.gamma_grid, cfg.cadd_trials, engine)?;
        let row = MetricsReport {
            detector: cfg.detector.kind,
            theta_true: cfg.theta_true,
            threshold: a,
            wadd_proxy: cadd.cadd,
            gap_bound: gap.map(|g| g.1),
            q_theta: gap.map(|g| g.0),
            far,
            cadd,
            pdc,
            trials: cfg.far_trials,
            censoring_rate: far.censoring_rate,
            seed: cfg.seed,
        };
        progress(i, &row);
        rows.push(row);
    }
    Ok(rows)
}
