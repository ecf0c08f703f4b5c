use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::rng::{derive_seed, stream_rng, Purpose};
use super::trial::{run_trial_indexed, ChangePoint, TrialConfig, TrialResult};
use super::SimulationError;
use crate::detectors::{skip_run_length, DetectorParams, Truncation};
use crate::distributions::{control_drift, Density, FamilySpec, Welford};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
pub const MIN_TRIALS: u64 = 100;
/// Conditional delays need at least this many paths with `tau >= gamma`.
pub const MIN_SURVIVORS: u64 = 10;
pub const CYCLE_CAP: u64 = 10_000_000;
pub const MIN_LONGRUN_HORIZON: u64 = 10_000;
pub const MIN_SURVIVAL_HORIZON: u64 = 10_000;
pub const DEFAULT_GAMMA_GRID: [u64; 5] = [1, 5, 25, 100, 400];
/// Censoring above this rate turns the FAR estimate into an upper bound.
pub const CENSORING_FLAG_RATE: f64 = 0.01;

/// Default censoring cap for false-alarm runs: `max(1e5, 20 e^A)`.
pub fn far_horizon(threshold: f64) -> u64 {
    let h = (20.0 * threshold.exp()).ceil();
    if h.is_finite() && h < 1e15 {
        (h as u64).max(100_000)
    } else {
        1_000_000_000_000_000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn normal(value: f64, std_error: f64) -> Self {
        Interval {
            lo: value - Z95 * std_error,
            hi: value + Z95 * std_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarEstimate {
    /// `1 / mean(tau)`.
    pub far: f64,
    /// Reciprocal of the 95% interval of `mean(tau)`.
    pub ci: Interval,
    pub mean_tau: f64,
    pub mean_tau_se: f64,
    pub censoring_rate: f64,
    /// Censoring above 1%: `mean_tau` is only a lower bound on `E_inf[tau]`,
    /// so `far` is an upper bound.
    pub upper_bound_only: bool,
    pub trials: u64,
}

impl FarEstimate {
    /// Standard error of `far` by the delta method.
    pub fn std_error(&self) -> f64 {
        self.mean_tau_se / (self.mean_tau * self.mean_tau)
    }
}

fn check_trials(n: u64) -> Result<(), SimulationError> {
    if n < MIN_TRIALS {
        return Err(SimulationError::InvalidArgument(format!(
            "need at least {MIN_TRIALS} trials, got {n}"
        )));
    }
    Ok(())
}

fn run_all(
    cfg: &TrialConfig,
    n: u64,
    engine: &Engine,
) -> Result<Vec<TrialResult>, SimulationError> {
    cfg.validate()?;
    engine.map(n, |i| run_trial_indexed(cfg, i))
}

/// False alarm rate `1 / E_inf[tau]` from `n_trials` change-free runs.
pub fn estimate_far(
    cfg: &TrialConfig,
    n_trials: u64,
    engine: &Engine,
) -> Result<FarEstimate, SimulationError> {
    if cfg.change != ChangePoint::Never {
        return Err(SimulationError::InvalidArgument(
            "false alarm runs need change = never".into(),
        ));
    }
    check_trials(n_trials)?;
    let results = run_all(cfg, n_trials, engine)?;
    let censored = results.iter().filter(|r| r.censored).count() as u64;
    if censored == n_trials {
        return Err(SimulationError::AllCensored { trials: n_trials });
    }
    let mut acc = Welford::default();
    for r in &results {
        acc.push(r.tau as f64);
    }
    let (m, se) = (acc.mean(), acc.std_error());
    let lo_tau = m - Z95 * se;
    let censoring_rate = censored as f64 / n_trials as f64;
    Ok(FarEstimate {
        far: 1.0 / m,
        ci: Interval {
            lo: 1.0 / (m + Z95 * se),
            hi: if lo_tau > 0.0 {
                1.0 / lo_tau
            } else {
                f64::INFINITY
            },
        },
        mean_tau: m,
        mean_tau_se: se,
        censoring_rate,
        upper_bound_only: censoring_rate > CENSORING_FLAG_RATE,
        trials: n_trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaddPoint {
    pub change: ChangePoint,
    /// `E[tau - gamma | tau >= gamma]`.
    pub delay: f64,
    pub std_error: f64,
    /// Paths with `tau >= gamma`.
    pub surviving: u64,
    /// Surviving paths cut at the horizon; their delay is understated.
    pub censored: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaddEstimate {
    pub points: Vec<CaddPoint>,
    /// Largest conditional delay over the probes.
    pub cadd: f64,
    pub cadd_se: f64,
    pub argmax: ChangePoint,
}

impl CaddEstimate {
    pub fn point(&self, change: ChangePoint) -> Option<&CaddPoint> {
        self.points.iter().find(|p| p.change == change)
    }

    /// The `gamma = 1` delay, `E_1[tau - 1]`, if probed.
    pub fn gamma_one(&self) -> Option<&CaddPoint> {
        self.point(ChangePoint::At(1))
    }
}

fn probe_key(change: ChangePoint) -> u64 {
    match change {
        ChangePoint::At(g) => g,
        ChangePoint::SkipBoundary { not_before } => not_before | (1 << 63),
        ChangePoint::Never => u64::MAX,
    }
}

/// Change-point probes for a grid: the grid itself, plus a skip-run-start
/// probe after every grid point above 1 for detectors that skip on data.
pub fn cadd_probes(gamma_grid: &[u64], data_efficient: bool) -> Vec<ChangePoint> {
    let mut out: Vec<ChangePoint> = gamma_grid.iter().map(|&g| ChangePoint::At(g)).collect();
    if data_efficient {
        out.extend(
            gamma_grid
                .iter()
                .filter(|&&g| g > 1)
                .map(|&g| ChangePoint::SkipBoundary { not_before: g }),
        );
    }
    out
}

/// Conditional delay at one change-point probe.
pub fn conditional_delay(
    cfg: &TrialConfig,
    change: ChangePoint,
    n_trials: u64,
    engine: &Engine,
) -> Result<CaddPoint, SimulationError> {
    let theta = cfg.theta_true.ok_or(SimulationError::MissingPostChange)?;
    let mut probe = cfg.clone().with_change(change, theta);
    probe.seed = derive_seed(cfg.seed, Purpose::Cadd, probe_key(change));
    let results = run_all(&probe, n_trials, engine)?;
    let mut acc = Welford::default();
    let mut censored = 0;
    for r in &results {
        if let Some(d) = r.delay() {
            acc.push(d as f64);
            censored += r.censored as u64;
        }
    }
    if acc.count() < MIN_SURVIVORS {
        return Err(SimulationError::TooFewSurvivors {
            change: change.to_string(),
            surviving: acc.count(),
            min: MIN_SURVIVORS,
        });
    }
    Ok(CaddPoint {
        change,
        delay: acc.mean(),
        std_error: acc.std_error(),
        surviving: acc.count(),
        censored,
    })
}

/// Conditional average detection delay, maximized over a change-point grid.
///
/// The grid is augmented with skip-run-start probes for data-efficient
/// detectors. `cfg.change` is ignored; `cfg.theta_true` is required.
pub fn estimate_cadd(
    cfg: &TrialConfig,
    gamma_grid: &[u64],
    n_trials: u64,
    engine: &Engine,
) -> Result<CaddEstimate, SimulationError> {
    if gamma_grid.is_empty() {
        return Err(SimulationError::InvalidArgument(
            "gamma grid is empty".into(),
        ));
    }
    check_trials(n_trials)?;
    let mut points = Vec::new();
    for change in cadd_probes(gamma_grid, cfg.detector.is_data_efficient()) {
        points.push(conditional_delay(cfg, change, n_trials, engine)?);
    }
    let best = points
        .iter()
        .copied()
        .reduce(|a, b| if b.delay > a.delay { b } else { a })
        .expect("non-empty grid");
    Ok(CaddEstimate {
        cadd: best.delay,
        cadd_se: best.std_error,
        argmax: best.change,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PdcMethod {
    #[serde(rename = "renewal-reward")]
    RenewalReward,
    #[serde(rename = "long-run")]
    LongRun,
}

impl std::fmt::Display for PdcMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PdcMethod::RenewalReward => "renewal-reward",
            PdcMethod::LongRun => "long-run",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdcEstimate {
    pub value: f64,
    pub std_error: f64,
    pub ci: Interval,
    pub method: PdcMethod,
    /// Cycles for the renewal estimator, trials for the long-run one.
    pub replications: u64,
}

impl PdcEstimate {
    fn new(value: f64, std_error: f64, method: PdcMethod, replications: u64) -> Self {
        PdcEstimate {
            value,
            std_error,
            ci: Interval::normal(value, std_error),
            method,
            replications,
        }
    }
}

const RENEWAL_CHUNK: u64 = 4_096;

/// Integer moments of (ladder epoch, skip run) pairs.
#[derive(Debug, Clone, Copy, Default)]
struct CycleSums {
    n: u128,
    t: u128,
    k: u128,
    tt: u128,
    kk: u128,
    tk: u128,
}

impl CycleSums {
    fn push(&mut self, t: u64, k: u64) {
        let (t, k) = (t as u128, k as u128);
        self.n += 1;
        self.t += t;
        self.k += k;
        self.tt += t * t;
        self.kk += k * k;
        self.tk += t * k;
    }

    fn merge(&mut self, o: &CycleSums) {
        self.n += o.n;
        self.t += o.t;
        self.k += o.k;
        self.tt += o.tt;
        self.kk += o.kk;
        self.tk += o.tk;
    }
}

/// Pre-change duty cycle of the DECuSum statistic on `family.control()`
/// from i.i.d. renewal cycles under `f_0`.
///
/// A cycle is the ladder epoch `tau_-` of the control log-likelihood walk
/// followed by `ceil(|W^{h+}| / mu)` skipped steps, where `W` is the ladder
/// height. The estimate is `E[tau_-] / (E[tau_-] + E[skips])`.
pub fn estimate_pdc_renewal(
    family: &FamilySpec,
    params: &DetectorParams,
    n_cycles: u64,
    seed: u64,
    engine: &Engine,
) -> Result<PdcEstimate, SimulationError> {
    check_trials(n_cycles)?;
    params.check_control()?;
    let pre = *family.pre();
    let llr = family.control().llr_against(&pre);
    let key = derive_seed(seed, Purpose::Renewal, 0);
    let chunks = n_cycles.div_ceil(RENEWAL_CHUNK);
    let partial = engine.map(chunks, |c| {
        let mut rng = stream_rng(key, c);
        let mut sums = CycleSums::default();
        let len = RENEWAL_CHUNK.min(n_cycles - c * RENEWAL_CHUNK);
        for _ in 0..len {
            let mut s = 0.0;
            let mut t = 0;
            while s >= 0.0 {
                if t == CYCLE_CAP {
                    return Err(SimulationError::CycleCap { cap: CYCLE_CAP });
                }
                t += 1;
                s += llr.eval(pre.sample(&mut rng))?;
            }
            sums.push(t, skip_run_length(params.h.apply(s), params.mu));
        }
        Ok(sums)
    })?;
    let mut total = CycleSums::default();
    for p in &partial {
        total.merge(p);
    }
    let n = total.n as f64;
    let a = total.t as f64 / n;
    let k = total.k as f64 / n;
    let var_t = (total.tt as f64 / n - a * a) * n / (n - 1.0);
    let var_k = (total.kk as f64 / n - k * k) * n / (n - 1.0);
    let cov = (total.tk as f64 / n - a * k) * n / (n - 1.0);
    let d = (a + k) * (a + k);
    let (ga, gk) = (k / d, -a / d);
    let var = (ga * ga * var_t + gk * gk * var_k + 2.0 * ga * gk * cov) / n;
    Ok(PdcEstimate::new(
        a / (a + k),
        var.max(0.0).sqrt(),
        PdcMethod::RenewalReward,
        n_cycles,
    ))
}

/// Long-run fraction of observations used over `horizon` change-free steps,
/// averaged over trials. The stopping threshold is disabled.
pub fn estimate_pdc_longrun(
    cfg: &TrialConfig,
    horizon: u64,
    n_trials: u64,
    engine: &Engine,
) -> Result<PdcEstimate, SimulationError> {
    if horizon < MIN_LONGRUN_HORIZON {
        return Err(SimulationError::InvalidArgument(format!(
            "long-run horizon must be >= {MIN_LONGRUN_HORIZON}, got {horizon}"
        )));
    }
    if n_trials < 2 {
        return Err(SimulationError::InvalidArgument(
            "need at least 2 long-run trials".into(),
        ));
    }
    let mut run = cfg
        .clone()
        .with_threshold(f64::INFINITY)
        .with_horizon(horizon);
    run.change = ChangePoint::Never;
    run.seed = derive_seed(cfg.seed, Purpose::LongRun, 0);
    let results = run_all(&run, n_trials, engine)?;
    let mut acc = Welford::default();
    for r in &results {
        acc.push(r.samples_used as f64 / horizon as f64);
    }
    Ok(PdcEstimate::new(
        acc.mean(),
        acc.std_error(),
        PdcMethod::LongRun,
        n_trials,
    ))
}

/// Upper bound `mu / (mu + D(f_0 || g))` on the duty cycle when `h = inf`.
pub fn pdc_bound(mu: f64, kl_pre_control: f64) -> f64 {
    mu / (mu + kl_pre_control)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    /// Fraction of walks that stayed `>= 0` up to `horizon`. Biased upward
    /// as an estimate of the infinite-horizon probability.
    pub value: f64,
    pub std_error: f64,
    pub horizon: u64,
    pub trials: u64,
}

/// `P(S_n >= 0 for all n <= horizon)` for the walk `S_n = sum log g(X_i)/f_0(X_i)`,
/// `X_i ~ theta_true`. No drift check.
pub fn walk_survival(
    pre: &Density,
    control: &Density,
    theta_true: &Density,
    n_trials: u64,
    horizon: u64,
    seed: u64,
    engine: &Engine,
) -> Result<SurvivalEstimate, SimulationError> {
    if n_trials < 2 || horizon == 0 {
        return Err(SimulationError::InvalidArgument(
            "need >= 2 trials and horizon >= 1".into(),
        ));
    }
    let llr = control.llr_against(pre);
    let key = derive_seed(seed, Purpose::Survival, 0);
    let survived = engine.map(n_trials, |i| {
        let mut rng = stream_rng(key, i);
        let mut s = 0.0;
        for _ in 0..horizon {
            s += llr.eval(theta_true.sample(&mut rng))?;
            if s < 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    })?;
    let hits = survived.iter().filter(|&&b| b).count() as f64;
    let n = n_trials as f64;
    let p = hits / n;
    Ok(SurvivalEstimate {
        value: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        horizon,
        trials: n_trials,
    })
}

/// Survival probability `q_theta` of the control walk under `theta_true`.
/// Fails unless the walk has positive drift under `theta_true`.
pub fn estimate_q_theta(
    family: &FamilySpec,
    theta_true: &Density,
    n_trials: u64,
    horizon: u64,
    seed: u64,
    engine: &Engine,
) -> Result<SurvivalEstimate, SimulationError> {
    if horizon < MIN_SURVIVAL_HORIZON {
        return Err(SimulationError::InvalidArgument(format!(
            "survival horizon must be >= {MIN_SURVIVAL_HORIZON}, got {horizon}"
        )));
    }
    let mut rng = stream_rng(derive_seed(seed, Purpose::Drift, 0), 0);
    let drift = control_drift(
        family.pre(),
        family.control(),
        theta_true,
        &mut rng,
        100_000,
    )?;
    let positive = if drift.exact {
        drift.value > 0.0
    } else {
        drift.value > 3.0 * drift.std_error
    };
    if !positive {
        return Err(SimulationError::AssumptionViolated(format!(
            "control drift under {theta_true} is {} (se {})",
            drift.value, drift.std_error
        )));
    }
    walk_survival(
        family.pre(),
        family.control(),
        theta_true,
        n_trials,
        horizon,
        seed,
        engine,
    )
}

/// `|log alpha| / kl`, the first-order lower bound on the worst-case delay.
pub fn lower_bound(alpha: f64, kl: f64) -> Result<f64, SimulationError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SimulationError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(kl > 0.0) || !kl.is_finite() {
        return Err(SimulationError::InvalidArgument(format!(
            "kl must be finite and > 0, got {kl}"
        )));
    }
    Ok(alpha.ln().abs() / kl)
}

/// `(1 / q + 1) ceil(h / mu) + 1`, the delay-gap constant for finite `h`.
pub fn delay_gap_bound(q: f64, h: Truncation, mu: f64) -> Result<f64, SimulationError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(SimulationError::InvalidArgument(format!(
            "q must lie in (0, 1], got {q}"
        )));
    }
    if !(mu > 0.0) {
        return Err(SimulationError::InvalidArgument(format!(
            "mu must be > 0, got {mu}"
        )));
    }
    let run = h.max_skip_run(mu).ok_or_else(|| {
        SimulationError::InvalidArgument("the delay-gap bound needs finite h".into())
    })?;
    Ok((1.0 / q + 1.0) * run as f64 + 1.0)
}
