//! Scalar densities used as pre-change, post-change and control laws.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::DistributionError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Base law of a one-parameter natural exponential family
/// `f_theta(x) = exp(theta * x - b(theta)) f_0(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    /// `f_0 = N(0, 1)`, `b(theta) = theta^2 / 2`; members are `N(theta, 1)`.
    Gaussian,
    /// `f_0 = Poisson(1)`, `b(theta) = e^theta - 1`; members are `Poisson(e^theta)`.
    Poisson,
}

impl BaseFamily {
    /// Log-partition function `b(theta)`, normalized so that `b(0) = 0`.
    pub fn log_partition(self, theta: f64) -> f64 {
        match self {
            BaseFamily::Gaussian => 0.5 * theta * theta,
            BaseFamily::Poisson => theta.exp_m1(),
        }
    }

    /// `b'(theta)`, the mean of the member with natural parameter `theta`.
    pub fn mean(self, theta: f64) -> f64 {
        match self {
            BaseFamily::Gaussian => theta,
            BaseFamily::Poisson => theta.exp(),
        }
    }

    /// `b''(theta)`, the variance of the member.
    pub fn variance(self, theta: f64) -> f64 {
        match self {
            BaseFamily::Gaussian => 1.0,
            BaseFamily::Poisson => theta.exp(),
        }
    }

    /// Log-density (or log-mass) of the base law `f_0`.
    pub fn log_base(self, x: f64) -> f64 {
        match self {
            BaseFamily::Gaussian => -0.5 * x * x - LN_SQRT_2PI,
            BaseFamily::Poisson => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -1.0 - ln_gamma(x + 1.0)
                }
            }
        }
    }

    fn sample_member<R: Rng + ?Sized>(self, theta: f64, rng: &mut R) -> f64 {
        match self {
            BaseFamily::Gaussian => theta + rng.sample::<f64, _>(StandardNormal),
            BaseFamily::Poisson => {
                // The rate is validated positive by construction (exp of a finite theta).
                let law = Poisson::new(theta.exp()).expect("positive Poisson rate");
                law.sample(rng)
            }
        }
    }
}

impl fmt::Display for BaseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseFamily::Gaussian => f.write_str("gaussian"),
            BaseFamily::Poisson => f.write_str("poisson"),
        }
    }
}

/// A univariate density that can be evaluated and sampled.
///
/// Gaussian densities have unit variance throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    /// `N(mean, 1)`.
    Gaussian { mean: f64 },
    /// Member of a natural exponential family with parameter `theta`.
    Member { family: BaseFamily, theta: f64 },
}

impl Density {
    pub fn gaussian(mean: f64) -> Self {
        Density::Gaussian { mean }
    }

    pub fn member(family: BaseFamily, theta: f64) -> Self {
        Density::Member { family, theta }
    }

    /// Mean of the unit-variance Gaussian this density is equal to, if any.
    ///
    /// `Member { Gaussian, theta }` is the same law as `Gaussian { mean: theta }`.
    pub fn gaussian_mean(&self) -> Option<f64> {
        match *self {
            Density::Gaussian { mean } => Some(mean),
            Density::Member {
                family: BaseFamily::Gaussian,
                theta,
            } => Some(theta),
            Density::Member { .. } => None,
        }
    }

    /// Natural-parameter view: `(family, theta)`. Gaussians map onto the
    /// Gaussian family.
    pub fn natural(&self) -> (BaseFamily, f64) {
        match *self {
            Density::Gaussian { mean } => (BaseFamily::Gaussian, mean),
            Density::Member { family, theta } => (family, theta),
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Density::Gaussian { mean } => {
                let z = x - mean;
                -0.5 * z * z - LN_SQRT_2PI
            }
            Density::Member { family, theta } => {
                theta * x - family.log_partition(theta) + family.log_base(x)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        let (family, theta) = self.natural();
        family.mean(theta)
    }

    pub fn variance(&self) -> f64 {
        let (family, theta) = self.natural();
        family.variance(theta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (family, theta) = self.natural();
        family.sample_member(theta, rng)
    }

    /// Closed-form `D(self || other)` when both laws live in the same natural family.
    pub fn kl_closed_form(&self, other: &Density) -> Option<f64> {
        let (fp, tp) = self.natural();
        let (fq, tq) = other.natural();
        if fp != fq {
            return None;
        }
        // D(f_p || f_q) = (tp - tq) b'(tp) - b(tp) + b(tq)
        let d = (tp - tq) * fp.mean(tp) - fp.log_partition(tp) + fp.log_partition(tq);
        Some(d.max(0.0))
    }

    /// Precompiled log-likelihood ratio `log self(x) / den(x)`.
    pub fn llr_against(&self, den: &Density) -> LlrFn {
        let (fn_, tn) = self.natural();
        let (fd, td) = den.natural();
        if fn_ == fd {
            LlrFn::Linear {
                slope: tn - td,
                intercept: -(fn_.log_partition(tn) - fn_.log_partition(td)),
            }
        } else {
            LlrFn::General {
                num: *self,
                den: *den,
            }
        }
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Gaussian { mean } => write!(f, "N({mean}, 1)"),
            Density::Member { family, theta } => write!(f, "{family}[theta={theta}]"),
        }
    }
}

/// Log-likelihood ratio of two fixed densities, evaluated per observation.
///
/// Pairs from the same natural family reduce to an affine function of `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LlrFn {
    Linear { slope: f64, intercept: f64 },
    General { num: Density, den: Density },
}

impl LlrFn {
    #[inline]
    pub fn eval(&self, x: f64) -> Result<f64, DistributionError> {
        match *self {
            LlrFn::Linear { slope, intercept } => {
                let v = slope * x + intercept;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(DistributionError::NonFiniteLlr { x })
                }
            }
            LlrFn::General { num, den } => llr(&num, &den, x),
        }
    }
}

/// `log num(x) - log den(x)`.
pub fn llr(num: &Density, den: &Density, x: f64) -> Result<f64, DistributionError> {
    let ln = num.log_density(x);
    if !ln.is_finite() {
        return Err(DistributionError::NonFiniteLogDensity {
            density: num.to_string(),
            x,
        });
    }
    let ld = den.log_density(x);
    if !ld.is_finite() {
        return Err(DistributionError::NonFiniteLogDensity {
            density: den.to_string(),
            x,
        });
    }
    Ok(ln - ld)
}

/// A divergence or drift estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    /// `true` when computed in closed form (`std_error` is then zero).
    pub exact: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
            exact: true,
        }
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn count(&self) -> u64 {
        self.n
    }

    pub(crate) fn mean(&self) -> f64 {
        self.mean
    }

    pub(crate) fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// `E_x~f[ llr(num, den, x) ]` by Monte Carlo.
pub(crate) fn mc_expected_llr<R: Rng + ?Sized>(
    sampler: &Density,
    num: &Density,
    den: &Density,
    rng: &mut R,
    n_samples: usize,
) -> Result<Estimate, DistributionError> {
    if n_samples == 0 {
        return Err(DistributionError::InvalidSampleCount { got: 0, min: 1 });
    }
    let mut acc = Welford::default();
    for _ in 0..n_samples {
        let x = sampler.sample(rng);
        acc.push(llr(num, den, x)?);
    }
    if !acc.mean().is_finite() {
        return Err(DistributionError::Divergent);
    }
    Ok(Estimate {
        value: acc.mean(),
        std_error: acc.std_error(),
        exact: false,
    })
}

/// Kullback-Leibler divergence `D(p || q)`.
///
/// Unit-variance Gaussian pairs use the closed form `(m_p - m_q)^2 / 2`; all
/// other pairs are estimated by sampling from `p`.
pub fn kl<R: Rng + ?Sized>(
    p: &Density,
    q: &Density,
    rng: &mut R,
    n_samples: usize,
) -> Result<Estimate, DistributionError> {
    if n_samples == 0 {
        return Err(DistributionError::InvalidSampleCount { got: 0, min: 1 });
    }
    if let (Some(mp), Some(mq)) = (p.gaussian_mean(), q.gaussian_mean()) {
        let d = mp - mq;
        return Ok(Estimate::exact(0.5 * d * d));
    }
    mc_expected_llr(p, p, q, rng, n_samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaussian_llr_examples() {
        let f0 = Density::gaussian(0.0);
        let v = llr(&Density::gaussian(0.6), &f0, 1.0).unwrap();
        assert!(close(v, 0.6 * 1.0 - 0.18, 1e-12), "{v}");
        let v = llr(&Density::gaussian(0.4), &f0, 0.0).unwrap();
        assert!(close(v, -0.08, 1e-12), "{v}");
        let g = Density::gaussian(0.3);
        assert_eq!(llr(&g, &g, 17.25).unwrap(), 0.0);
    }

    #[test]
    fn member_and_gaussian_agree() {
        let a = Density::member(BaseFamily::Gaussian, 0.7);
        let b = Density::gaussian(0.7);
        for &x in &[-3.0, -0.1, 0.0, 2.5] {
            assert!(close(a.log_density(x), b.log_density(x), 1e-12));
        }
    }

    #[test]
    fn linear_llr_matches_general_route() {
        let f0 = Density::gaussian(0.0);
        let f1 = Density::gaussian(0.8);
        let fast = f1.llr_against(&f0);
        assert!(matches!(fast, LlrFn::Linear { .. }));
        for &x in &[-2.0, 0.0, 0.3, 4.0] {
            let slow = llr(&f1, &f0, x).unwrap();
            assert!(close(fast.eval(x).unwrap(), slow, 1e-12));
        }
        let p0 = Density::member(BaseFamily::Poisson, 0.0);
        let p1 = Density::member(BaseFamily::Poisson, 0.5);
        let fast = p1.llr_against(&p0);
        for &x in &[0.0, 1.0, 3.0, 9.0] {
            assert!(close(
                fast.eval(x).unwrap(),
                llr(&p1, &p0, x).unwrap(),
                1e-12
            ));
        }
    }

    #[test]
    fn non_finite_log_density_is_reported() {
        let p0 = Density::member(BaseFamily::Poisson, 0.0);
        let p1 = Density::member(BaseFamily::Poisson, 0.5);
        let err = llr(&p1, &p0, -2.0).unwrap_err();
        match err {
            DistributionError::NonFiniteLogDensity { density, x } => {
                assert!(density.contains("poisson"));
                assert_eq!(x, -2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gaussian_kl_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f0 = Density::gaussian(0.0);
        let k = kl(&Density::gaussian(0.6), &f0, &mut rng, 1).unwrap();
        assert!(k.exact && close(k.value, 0.18, 1e-12));
        let k = kl(&Density::gaussian(0.4), &f0, &mut rng, 1).unwrap();
        assert!(close(k.value, 0.08, 1e-12));
        let k = kl(&f0, &f0, &mut rng, 1).unwrap();
        assert_eq!(k.value, 0.0);
        assert!(kl(&f0, &f0, &mut rng, 0).is_err());
    }

    /// Midpoint quadrature of the KL integrand, independent of the closed form.
    fn kl_quadrature(mp: f64, mq: f64) -> f64 {
        let (lo, hi, n) = (-12.0, 12.0, 240_000);
        let h = (hi - lo) / n as f64;
        let p = Density::gaussian(mp);
        let q = Density::gaussian(mq);
        (0..n)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * h;
                let lp = p.log_density(x);
                lp.exp() * (lp - q.log_density(x)) * h
            })
            .sum()
    }

    #[test]
    fn gaussian_kl_matches_quadrature() {
        assert!(close(kl_quadrature(0.6, 0.0), 0.18, 1e-8));
        assert!(close(kl_quadrature(0.4, 0.0), 0.08, 1e-8));
        assert!(close(kl_quadrature(-1.3, 0.2), 0.5 * 1.5 * 1.5, 1e-8));
    }

    #[test]
    fn poisson_kl_monte_carlo_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = Density::member(BaseFamily::Poisson, 0.5);
        let q = Density::member(BaseFamily::Poisson, 0.0);
        let est = kl(&p, &q, &mut rng, 200_000).unwrap();
        let exact = p.kl_closed_form(&q).unwrap();
        assert!(!est.exact);
        assert!(
            (est.value - exact).abs() <= 4.0 * est.std_error,
            "mc {} exact {exact} se {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn sample_means_within_five_standard_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        for d in [
            Density::gaussian(0.6),
            Density::gaussian(-1.0),
            Density::member(BaseFamily::Poisson, 0.3),
        ] {
            let mut acc = Welford::default();
            for _ in 0..n {
                acc.push(d.sample(&mut rng));
            }
            let se = (d.variance() / n as f64).sqrt();
            assert!(
                (acc.mean() - d.mean()).abs() <= 5.0 * se,
                "{d}: {} vs {}",
                acc.mean(),
                d.mean()
            );
        }
    }

    #[test]
    fn gaussian_log_density_is_finite() {
        let d = Density::gaussian(0.4);
        for &x in &[-1e6, -3.0, 0.0, 1e-300, 7.5, 1e6] {
            assert!(d.log_density(x).is_finite());
        }
    }
}
