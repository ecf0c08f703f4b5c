use rand::Rng;
use serde::{Deserialize, Serialize};

use super::density::mc_expected_llr;
use super::{Density, DistributionError, Estimate, ExponentialFamilySpec};

/// Minimum sample count accepted by [`check_least_favorable`].
pub const MIN_DRIFT_SAMPLES: usize = 1_000;

/// Number of parameter values probed on an exponential-family interval.
pub const INTERVAL_DRIFT_PROBES: usize = 11;

/// The post-change set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PostChange {
    Finite { members: Vec<Density> },
    Exponential(ExponentialFamilySpec),
}

/// Which member of the post-change set is least favorable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaStar {
    Index(usize),
    Value(f64),
}

/// Pre-change law, post-change set, and the density that drives observation control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pre: Density,
    post: PostChange,
    theta_star: ThetaStar,
    control: Density,
}

impl FamilySpec {
    /// Finite family `{members}` with `members[star]` as the least favorable law.
    pub fn finite(
        pre: Density,
        members: Vec<Density>,
        star: usize,
    ) -> Result<Self, DistributionError> {
        if members.is_empty() {
            return Err(DistributionError::EmptyFamily);
        }
        let control = *members
            .get(star)
            .ok_or(DistributionError::ThetaStarOutOfRange(star as f64))?;
        for m in &members {
            check_separated(&pre, m)?;
        }
        Ok(FamilySpec {
            pre,
            post: PostChange::Finite { members },
            theta_star: ThetaStar::Index(star),
            control,
        })
    }

    /// Unit-variance Gaussian family `N(theta, 1)` against `N(0, 1)`.
    pub fn gaussian_finite(thetas: &[f64], star: usize) -> Result<Self, DistributionError> {
        let members = thetas.iter().map(|&t| Density::gaussian(t)).collect();
        FamilySpec::finite(Density::gaussian(0.0), members, star)
    }

    /// Exponential family with least favorable parameter `theta_star`.
    pub fn exponential(
        fam: ExponentialFamilySpec,
        theta_star: f64,
    ) -> Result<Self, DistributionError> {
        fam.validate()?;
        if !fam.contains(theta_star) {
            return Err(DistributionError::ThetaStarOutOfRange(theta_star));
        }
        Ok(FamilySpec {
            pre: fam.pre_change(),
            post: PostChange::Exponential(fam),
            theta_star: ThetaStar::Value(theta_star),
            control: fam.member(theta_star),
        })
    }

    /// Replace the control density with an arbitrary law `g`, which need not
    /// belong to the post-change set.
    pub fn with_control(mut self, control: Density) -> Self {
        self.control = control;
        self
    }

    pub fn pre(&self) -> &Density {
        &self.pre
    }

    pub fn post(&self) -> &PostChange {
        &self.post
    }

    pub fn control(&self) -> &Density {
        &self.control
    }

    pub fn theta_star(&self) -> ThetaStar {
        self.theta_star
    }

    /// The designated least favorable member.
    pub fn least_favorable(&self) -> Density {
        match (&self.post, self.theta_star) {
            (PostChange::Finite { members }, ThetaStar::Index(i)) => members[i],
            (PostChange::Exponential(fam), ThetaStar::Value(t)) => fam.member(t),
            // Constructors pair the variants.
            _ => unreachable!("theta_star variant does not match the family"),
        }
    }

    /// Index of the member equal to the control density, when there is one.
    pub fn control_index(&self) -> Option<usize> {
        match &self.post {
            PostChange::Finite { members } => members.iter().position(|m| *m == self.control),
            PostChange::Exponential(_) => None,
        }
    }

    /// Members to probe: the full list, or an even grid over the interval.
    pub fn probe_members(&self) -> Vec<Density> {
        match &self.post {
            PostChange::Finite { members } => members.clone(),
            PostChange::Exponential(fam) => {
                let n = INTERVAL_DRIFT_PROBES;
                (0..n)
                    .map(|i| {
                        let t = fam.theta_lower
                            + (fam.theta_upper - fam.theta_lower) * i as f64 / (n - 1) as f64;
                        fam.member(t)
                    })
                    .collect()
            }
        }
    }

    /// Whether `d` is a member of the post-change set.
    pub fn contains(&self, d: &Density) -> bool {
        match &self.post {
            PostChange::Finite { members } => members.contains(d),
            PostChange::Exponential(fam) => {
                let (family, theta) = d.natural();
                family == fam.base && fam.contains(theta)
            }
        }
    }
}

fn check_separated(pre: &Density, member: &Density) -> Result<(), DistributionError> {
    let forward = member.kl_closed_form(pre);
    let backward = pre.kl_closed_form(member);
    match (forward, backward) {
        (Some(f), Some(b)) if f > 0.0 && b > 0.0 && f.is_finite() && b.is_finite() => Ok(()),
        (Some(_), Some(_)) => Err(DistributionError::IndistinguishableMember(
            member.to_string(),
        )),
        _ => Err(DistributionError::UnsupportedPair {
            num: member.to_string(),
            den: pre.to_string(),
        }),
    }
}

/// Drift of the control log-likelihood ratio under one post-change member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberDrift {
    pub member: Density,
    /// `E^theta[ log g(X) / f_0(X) ]`.
    pub drift: Estimate,
    /// `D(f_theta || f_0)`.
    pub kl_post_pre: f64,
    /// `D(f_0 || f_theta)`.
    pub kl_pre_post: f64,
}

impl MemberDrift {
    /// Positive at three standard errors (strictly positive if exact).
    pub fn is_positive(&self) -> bool {
        if self.drift.exact {
            self.drift.value > 0.0
        } else {
            self.drift.value - 3.0 * self.drift.std_error > 0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub control: Density,
    pub members: Vec<MemberDrift>,
    pub assumption_holds: bool,
}

/// `E_{X ~ member}[ log control(X) / pre(X) ]`; closed form for unit-variance Gaussians.
pub fn control_drift<R: Rng + ?Sized>(
    pre: &Density,
    control: &Density,
    member: &Density,
    rng: &mut R,
    n_samples: usize,
) -> Result<Estimate, DistributionError> {
    if let (Some(m0), Some(mg), Some(mt)) = (
        pre.gaussian_mean(),
        control.gaussian_mean(),
        member.gaussian_mean(),
    ) {
        return Ok(Estimate::exact((mg - m0) * mt - 0.5 * (mg * mg - m0 * m0)));
    }
    mc_expected_llr(member, control, pre, rng, n_samples)
}

/// Checks that the control density has positive log-likelihood drift against
/// `f_0` under every post-change member.
pub fn check_least_favorable<R: Rng + ?Sized>(
    spec: &FamilySpec,
    rng: &mut R,
    n_samples: usize,
) -> Result<DriftReport, DistributionError> {
    if n_samples < MIN_DRIFT_SAMPLES {
        return Err(DistributionError::InvalidSampleCount {
            got: n_samples,
            min: MIN_DRIFT_SAMPLES,
        });
    }
    let members = spec.probe_members();
    if members.is_empty() {
        return Err(DistributionError::EmptyFamily);
    }
    let mut out = Vec::with_capacity(members.len());
    for member in members {
        let drift = control_drift(&spec.pre, &spec.control, &member, rng, n_samples)?;
        let kl_post_pre =
            member
                .kl_closed_form(&spec.pre)
                .ok_or_else(|| DistributionError::UnsupportedPair {
                    num: member.to_string(),
                    den: spec.pre.to_string(),
                })?;
        let kl_pre_post = spec.pre.kl_closed_form(&member).unwrap_or(f64::NAN);
        out.push(MemberDrift {
            member,
            drift,
            kl_post_pre,
            kl_pre_post,
        });
    }
    let assumption_holds = out.iter().all(MemberDrift::is_positive);
    Ok(DriftReport {
        control: spec.control,
        members: out,
        assumption_holds,
    })
}
