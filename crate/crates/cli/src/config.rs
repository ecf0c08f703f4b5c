//! Experiment configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use qcd_core::detectors::{DetectorKind, DetectorParams, DetectorSpec, SkipPattern, Truncation};
use qcd_core::distributions::{BaseFamily, Density, ExponentialFamilySpec, FamilySpec};
use qcd_core::simulation::{
    CurveConfig, DEFAULT_GAMMA_GRID, MIN_LONGRUN_HORIZON, MIN_SURVIVAL_HORIZON, MIN_TRIALS,
};
use serde::{Deserialize, Serialize};

/// A rejected configuration, with the field or source position at fault.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    fn at(location: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError {
            location: location.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// `{ N(theta, 1) : theta in thetas }` against `N(0, 1)`.
    GaussianFinite {
        thetas: Vec<f64>,
        theta_star: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        control_density: Option<Density>,
    },
    /// `{ N(theta, 1) : theta in [lo, hi], |theta| > epsilon }` against `N(0, 1)`.
    GaussianExpfam {
        theta_interval: [f64; 2],
        #[serde(default)]
        epsilon: f64,
        theta_star: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        control_density: Option<Density>,
    },
}

impl FamilyConfig {
    pub fn theta_star(&self) -> f64 {
        match self {
            FamilyConfig::GaussianFinite { theta_star, .. }
            | FamilyConfig::GaussianExpfam { theta_star, .. } => *theta_star,
        }
    }

    fn control_density(&self) -> Option<Density> {
        match self {
            FamilyConfig::GaussianFinite {
                control_density, ..
            }
            | FamilyConfig::GaussianExpfam {
                control_density, ..
            } => *control_density,
        }
    }

    /// Member density with parameter `theta`, if `theta` is in the family.
    pub fn member(&self, theta: f64) -> Option<Density> {
        match self {
            FamilyConfig::GaussianFinite { thetas, .. } => {
                thetas.contains(&theta).then(|| Density::gaussian(theta))
            }
            FamilyConfig::GaussianExpfam { theta_interval, .. } => (theta >= theta_interval[0]
                && theta <= theta_interval[1])
                .then(|| Density::member(BaseFamily::Gaussian, theta)),
        }
    }

    fn build(&self) -> Result<FamilySpec, ConfigError> {
        let star = self.theta_star();
        let spec = match self {
            FamilyConfig::GaussianFinite { thetas, .. } => {
                if thetas.is_empty() {
                    return Err(ConfigError::at(
                        "family.thetas",
                        "must list at least one value",
                    ));
                }
                if let Some(t) = thetas.iter().find(|t| !t.is_finite()) {
                    return Err(ConfigError::at(
                        "family.thetas",
                        format!("{t} is not finite"),
                    ));
                }
                let idx = thetas.iter().position(|&t| t == star).ok_or_else(|| {
                    ConfigError::at(
                        "family.theta_star",
                        format!("{star} is not one of the listed thetas"),
                    )
                })?;
                FamilySpec::gaussian_finite(thetas, idx)
                    .map_err(|e| ConfigError::at("family.thetas", e))?
            }
            FamilyConfig::GaussianExpfam {
                theta_interval,
                epsilon,
                ..
            } => {
                let fam = ExponentialFamilySpec::new(
                    BaseFamily::Gaussian,
                    theta_interval[0],
                    theta_interval[1],
                    *epsilon,
                )
                .map_err(|e| ConfigError::at("family.theta_interval", e))?;
                if !fam.contains(star) {
                    return Err(ConfigError::at(
                        "family.theta_star",
                        format!(
                            "{star} is outside [{}, {}]",
                            theta_interval[0], theta_interval[1]
                        ),
                    ));
                }
                FamilySpec::exponential(fam, star)
                    .map_err(|e| ConfigError::at("family.theta_star", e))?
            }
        };
        Ok(match self.control_density() {
            Some(g) => spec.with_control(g),
            None => spec,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(rename = "type")]
    pub kind: DetectorKind,
    /// Name used in output rows; defaults to the detector type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub h: Truncation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_pattern: Option<SkipPattern>,
    /// Post-change parameter for `cusum` and `decusum`; defaults to `theta_star`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

fn default_mu() -> f64 {
    1.0
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        DetectorConfig {
            kind,
            label: None,
            mu: default_mu(),
            h: Truncation::Infinite,
            window: None,
            skip_pattern: None,
            theta: None,
        }
    }

    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    pub detectors: Vec<DetectorConfig>,
    pub thresholds: Vec<f64>,
    /// Post-change parameter for delay runs; defaults to `theta_star`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<f64>,
    /// False alarm trials per threshold.
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Trials per change-point probe.
    #[serde(default = "default_cadd_trials")]
    pub cadd_trials: u64,
    #[serde(default = "default_pdc_cycles")]
    pub pdc_cycles: u64,
    #[serde(default = "default_longrun_trials")]
    pub longrun_trials: u64,
    #[serde(default = "default_horizon_floor")]
    pub longrun_horizon: u64,
    /// Walks for the survival probability behind the delay-gap bound; 0 skips it.
    #[serde(default)]
    pub q_trials: u64,
    /// Censoring cap for every run; defaults to a threshold-dependent horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_trials() -> u64 {
    20_000
}

fn default_cadd_trials() -> u64 {
    4_000
}

fn default_pdc_cycles() -> u64 {
    200_000
}

fn default_longrun_trials() -> u64 {
    200
}

fn default_horizon_floor() -> u64 {
    MIN_LONGRUN_HORIZON
}

fn default_gamma_grid() -> Vec<u64> {
    DEFAULT_GAMMA_GRID.to_vec()
}

/// A validated configuration, resolved into library types.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub family: FamilySpec,
    pub detectors: Vec<DetectorSpec>,
    pub theta_true: Density,
}

impl Experiment {
    pub fn curve_config(&self, i: usize) -> CurveConfig {
        let c = &self.config;
        let mut cfg = CurveConfig::new(
            self.family.clone(),
            self.detectors[i].clone(),
            self.theta_true,
            c.seed,
        );
        cfg.gamma_grid = c.gamma_grid.clone();
        cfg.far_trials = c.trials;
        cfg.cadd_trials = c.cadd_trials;
        cfg.pdc_cycles = c.pdc_cycles;
        cfg.longrun_trials = c.longrun_trials;
        cfg.longrun_horizon = c.longrun_horizon;
        cfg.q_trials = c.q_trials;
        cfg.q_horizon = MIN_SURVIVAL_HORIZON;
        cfg.horizon = c.horizon;
        cfg
    }

    pub fn theta_true_value(&self) -> f64 {
        self.config
            .theta_true
            .unwrap_or(self.config.family.theta_star())
    }
}

impl ExperimentConfig {
    /// Parses JSON, reporting the line and column of syntax and type errors.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text)
            .map_err(|e| ConfigError::at(format!("line {}, column {}", e.line(), e.column()), e))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at(path.display().to_string(), e))?;
        Self::from_json(&text).map_err(|e| ConfigError {
            location: format!("{}, {}", path.display(), e.location),
            ..e
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field and resolves the family and detectors.
    pub fn validate(&self) -> Result<Experiment, ConfigError> {
        let family = self.family.build()?;

        if self.thresholds.is_empty() {
            return Err(ConfigError::at(
                "thresholds",
                "must list at least one threshold",
            ));
        }
        for (i, &a) in self.thresholds.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(ConfigError::at(
                    format!("thresholds[{i}]"),
                    format!("must be finite and >= 0, got {a}"),
                ));
            }
            if i > 0 && a <= self.thresholds[i - 1] {
                return Err(ConfigError::at(
                    format!("thresholds[{i}]"),
                    "thresholds must be strictly increasing",
                ));
            }
        }

        let theta_true_value = self.theta_true.unwrap_or(self.family.theta_star());
        let theta_true = self.family.member(theta_true_value).ok_or_else(|| {
            ConfigError::at(
                "theta_true",
                format!("{theta_true_value} is not in the family"),
            )
        })?;

        for (name, value, min) in [
            ("trials", self.trials, MIN_TRIALS),
            ("cadd_trials", self.cadd_trials, MIN_TRIALS),
            ("pdc_cycles", self.pdc_cycles, MIN_TRIALS),
            ("longrun_trials", self.longrun_trials, 2),
            ("longrun_horizon", self.longrun_horizon, MIN_LONGRUN_HORIZON),
        ] {
            if value < min {
                return Err(ConfigError::at(
                    name,
                    format!("must be >= {min}, got {value}"),
                ));
            }
        }
        if self.q_trials == 1 {
            return Err(ConfigError::at("q_trials", "must be 0 or >= 2"));
        }
        if self.horizon == Some(0) {
            return Err(ConfigError::at("horizon", "must be >= 1"));
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.contains(&0) {
            return Err(ConfigError::at(
                "gamma_grid",
                "must list change points >= 1",
            ));
        }

        if self.detectors.is_empty() {
            return Err(ConfigError::at(
                "detectors",
                "must list at least one detector",
            ));
        }
        let detectors = self
            .detectors
            .iter()
            .enumerate()
            .map(|(i, d)| self.detector_spec(i, d, &family))
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Experiment {
            config: self.clone(),
            family,
            detectors,
            theta_true,
        })
    }

    fn detector_spec(
        &self,
        i: usize,
        d: &DetectorConfig,
        family: &FamilySpec,
    ) -> Result<DetectorSpec, ConfigError> {
        let at = |field: &str| format!("detectors[{i}].{field}");
        if !(d.mu.is_finite() && d.mu > 0.0) {
            return Err(ConfigError::at(
                at("mu"),
                format!("must be finite and > 0, got {}", d.mu),
            ));
        }
        if d.window == Some(0) {
            return Err(ConfigError::at(at("window"), "must be >= 1"));
        }
        let mut params = DetectorParams::new(self.thresholds[0])
            .with_mu(d.mu)
            .with_h(d.h);
        params.window = d.window;
        params.skip_pattern = d.skip_pattern;
        let mut spec = DetectorSpec::new(d.kind, params);
        if let Some(t) = d.theta {
            if d.kind.is_composite() {
                return Err(ConfigError::at(
                    at("theta"),
                    format!("{} detectors search the whole family", d.kind),
                ));
            }
            let member = self
                .family
                .member(t)
                .ok_or_else(|| ConfigError::at(at("theta"), format!("{t} is not in the family")))?;
            spec = spec.with_target(member);
        }
        spec.build(family, (self.seed, 0))
            .map_err(|e| ConfigError::at(format!("detectors[{i}]"), e))?;
        Ok(spec)
    }
}
