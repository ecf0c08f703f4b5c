//! Exponential-family post-change sets and the generalized likelihood maximization.

use serde::{Deserialize, Serialize};

use super::{BaseFamily, Density, DistributionError};

/// Absolute tolerance of the golden-section search on the natural parameter.
pub const GOLDEN_TOLERANCE: f64 = 1e-10;

const CONVEXITY_PROBES: usize = 64;
const CONVEXITY_SLACK: f64 = -1e-9;

/// Post-change family `{ f_theta : theta in [theta_lower, theta_upper] }` built on
/// a natural exponential family, with an exclusion radius `epsilon` around zero.
///
/// The effective search set is `{ theta in [theta_lower, theta_upper] : |theta| > epsilon }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFamilySpec {
    pub base: BaseFamily,
    pub theta_lower: f64,
    pub theta_upper: f64,
    #[serde(default)]
    pub epsilon: f64,
}

/// Result of [`glr_sup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlrMax {
    pub value: f64,
    pub theta: f64,
}

impl ExponentialFamilySpec {
    pub fn new(
        base: BaseFamily,
        theta_lower: f64,
        theta_upper: f64,
        epsilon: f64,
    ) -> Result<Self, DistributionError> {
        let spec = ExponentialFamilySpec {
            base,
            theta_lower,
            theta_upper,
            epsilon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DistributionError> {
        let (lo, hi) = (self.theta_lower, self.theta_upper);
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo >= hi {
            return Err(DistributionError::InvalidInterval {
                lower: lo,
                upper: hi,
            });
        }
        if !(self.epsilon >= 0.0) {
            return Err(DistributionError::InvalidEpsilon(self.epsilon));
        }
        if self.base.log_partition(0.0) != 0.0 {
            return Err(DistributionError::LogPartitionNotNormalized);
        }
        let step = (hi - lo) / CONVEXITY_PROBES as f64;
        for i in 1..CONVEXITY_PROBES {
            let t = lo + i as f64 * step;
            let b = |t: f64| self.base.log_partition(t);
            let second = b(t + step) - 2.0 * b(t) + b(t - step);
            if second < CONVEXITY_SLACK {
                return Err(DistributionError::NonConvexLogPartition { theta: t });
            }
        }
        self.effective_interval().map(|_| ())
    }

    pub fn log_partition(&self, theta: f64) -> f64 {
        self.base.log_partition(theta)
    }

    /// `f_0`, the member with `theta = 0`.
    pub fn pre_change(&self) -> Density {
        Density::member(self.base, 0.0)
    }

    pub fn member(&self, theta: f64) -> Density {
        Density::member(self.base, theta)
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_lower && theta <= self.theta_upper
    }

    /// Closed search interval after removing `|theta| <= epsilon`.
    pub fn effective_interval(&self) -> Result<(f64, f64), DistributionError> {
        let lo = self.theta_lower.max(self.epsilon);
        if lo > self.theta_upper || self.epsilon >= self.theta_upper {
            return Err(DistributionError::EmptyInterval {
                epsilon: self.epsilon,
                upper: self.theta_upper,
            });
        }
        Ok((lo, self.theta_upper))
    }
}

/// `sup_theta theta * sum - count * b(theta)` over the effective interval of `fam`.
///
/// Gaussian families use the clamped sample mean; other families use
/// golden-section search on the concave objective.
pub fn glr_sup(
    sum: f64,
    count: u64,
    fam: &ExponentialFamilySpec,
) -> Result<GlrMax, DistributionError> {
    if count == 0 {
        return Err(DistributionError::EmptyHypothesis);
    }
    let (lo, hi) = fam.effective_interval()?;
    Ok(glr_sup_on(sum, count as f64, fam.base, lo, hi))
}

#[inline]
pub(crate) fn glr_sup_on(sum: f64, count: f64, base: BaseFamily, lo: f64, hi: f64) -> GlrMax {
    let objective = |t: f64| t * sum - count * base.log_partition(t);
    let theta = match base {
        BaseFamily::Gaussian => (sum / count).clamp(lo, hi),
        _ => golden_section_max(objective, lo, hi, GOLDEN_TOLERANCE),
    };
    GlrMax {
        value: objective(theta),
        theta,
    }
}

/// Maximizer of a concave function on `[lo, hi]`, to absolute tolerance `tol` in the argument.
pub(crate) fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // The optimum may sit on a boundary; compare against the endpoints explicitly.
    [mid, lo, hi]
        .into_iter()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap_or(mid)
}
