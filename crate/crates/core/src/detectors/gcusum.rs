use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{expect_sample, CusumState, Detector, DetectorError, DetectorParams, StepOutcome};
use crate::distributions::{glr_sup_on, BaseFamily, Density, ExponentialFamilySpec, LlrFn};

/// One CuSum statistic per member of a finite post-change family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FiniteGcusumState {
    stats: Vec<CusumState>,
}

impl FiniteGcusumState {
    pub fn new(members: usize) -> Self {
        FiniteGcusumState {
            stats: vec![CusumState::default(); members],
        }
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.stats.iter().map(CusumState::value)
    }

    /// `max_theta C_n(theta)`; `-inf` for an empty family.
    pub fn max(&self) -> f64 {
        self.values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn update(&mut self, llrs: &[f64]) -> Result<f64, DetectorError> {
        if llrs.len() != self.stats.len() {
            return Err(DetectorError::LengthMismatch {
                expected: self.stats.len(),
                got: llrs.len(),
            });
        }
        let mut max = f64::NEG_INFINITY;
        for (s, &z) in self.stats.iter_mut().zip(llrs) {
            max = max.max(s.update(z)?);
        }
        Ok(max)
    }

    /// Componentwise CuSum update; the statistic is the maximum.
    pub fn step(&mut self, llrs: &[f64], threshold: f64) -> Result<StepOutcome, DetectorError> {
        let max = self.update(llrs)?;
        Ok(StepOutcome::new(true, max, threshold))
    }
}

/// Accumulated sufficient statistic of one candidate change start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub sum: f64,
    pub count: u64,
    /// GLR value `sup_theta theta * sum - count * b(theta)` after the last update.
    pub value: f64,
}

/// Generalized likelihood ratio statistic over an exponential-family interval.
///
/// Each start `k` keeps `(sum_{i>=k} x_i, n - k + 1)`. A start whose GLR value
/// has dropped to `<= 0` is dominated for every parameter by the start opened
/// on the next observation, so it is discarded; the maximum over the retained
/// starts equals the maximum over all starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFamilyGcusumState {
    hypotheses: VecDeque<Hypothesis>,
    window: Option<usize>,
    statistic: f64,
    observed: u64,
}

impl ExpFamilyGcusumState {
    pub fn new(window: Option<usize>) -> Self {
        ExpFamilyGcusumState {
            hypotheses: VecDeque::new(),
            window,
            statistic: f64::NEG_INFINITY,
            observed: 0,
        }
    }

    pub fn hypotheses(&self) -> impl ExactSizeIterator<Item = &Hypothesis> {
        self.hypotheses.iter()
    }

    /// `-inf` before the first observation.
    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    pub fn observed(&self) -> u64 {
        self.observed
    }

    pub(crate) fn update(&mut self, x: f64, base: BaseFamily, lo: f64, hi: f64) -> f64 {
        self.hypotheses.retain(|h| h.value > 0.0);
        for h in self.hypotheses.iter_mut() {
            h.sum += x;
            h.count += 1;
        }
        self.hypotheses.push_back(Hypothesis {
            sum: x,
            count: 1,
            value: 0.0,
        });
        if let Some(w) = self.window {
            while self
                .hypotheses
                .front()
                .is_some_and(|h| h.count as usize > w)
            {
                self.hypotheses.pop_front();
            }
        }
        let mut max = f64::NEG_INFINITY;
        for h in self.hypotheses.iter_mut() {
            h.value = glr_sup_on(h.sum, h.count as f64, base, lo, hi).value;
            max = max.max(h.value);
        }
        self.observed += 1;
        self.statistic = max;
        max
    }

    pub fn step(
        &mut self,
        x: f64,
        fam: &ExponentialFamilySpec,
        threshold: f64,
    ) -> Result<StepOutcome, DetectorError> {
        if !x.is_finite() {
            return Err(DetectorError::NonFiniteObservation(x));
        }
        let (lo, hi) = fam.effective_interval()?;
        let g = self.update(x, fam.base, lo, hi);
        Ok(StepOutcome::new(true, g, threshold))
    }
}

/// Detection half of a GLR CuSum, shared with the data-efficient variant.
#[derive(Debug, Clone)]
pub(crate) enum GlrCore {
    Finite {
        llrs: Vec<LlrFn>,
        scratch: Vec<f64>,
        state: FiniteGcusumState,
    },
    Exponential {
        base: BaseFamily,
        lo: f64,
        hi: f64,
        state: ExpFamilyGcusumState,
    },
}

impl GlrCore {
    pub(crate) fn finite(members: &[Density], pre: &Density) -> Self {
        GlrCore::Finite {
            llrs: members.iter().map(|m| m.llr_against(pre)).collect(),
            scratch: vec![0.0; members.len()],
            state: FiniteGcusumState::new(members.len()),
        }
    }

    pub(crate) fn exponential(
        fam: &ExponentialFamilySpec,
        window: Option<usize>,
    ) -> Result<Self, DetectorError> {
        let (lo, hi) = fam.effective_interval()?;
        Ok(GlrCore::Exponential {
            base: fam.base,
            lo,
            hi,
            state: ExpFamilyGcusumState::new(window),
        })
    }

    pub(crate) fn update(&mut self, x: f64) -> Result<f64, DetectorError> {
        match self {
            GlrCore::Finite {
                llrs,
                scratch,
                state,
            } => {
                for (z, l) in scratch.iter_mut().zip(llrs.iter()) {
                    *z = l.eval(x)?;
                }
                state.update(scratch)
            }
            GlrCore::Exponential {
                base,
                lo,
                hi,
                state,
            } => Ok(state.update(x, *base, *lo, *hi)),
        }
    }

    pub(crate) fn statistic(&self) -> f64 {
        match self {
            GlrCore::Finite { state, .. } => state.max(),
            GlrCore::Exponential { state, .. } => state.statistic(),
        }
    }

    pub(crate) fn reset(&mut self) {
        match self {
            GlrCore::Finite { state, llrs, .. } => *state = FiniteGcusumState::new(llrs.len()),
            GlrCore::Exponential { state, .. } => *state = ExpFamilyGcusumState::new(state.window),
        }
    }

    pub(crate) fn finite_state(&self) -> Option<&FiniteGcusumState> {
        match self {
            GlrCore::Finite { state, .. } => Some(state),
            GlrCore::Exponential { .. } => None,
        }
    }

    pub(crate) fn exp_state(&self) -> Option<&ExpFamilyGcusumState> {
        match self {
            GlrCore::Exponential { state, .. } => Some(state),
            GlrCore::Finite { .. } => None,
        }
    }
}

/// GLR-based CuSum: finite family (MCuSum) or exponential-family interval,
/// optionally window-limited. Samples every step.
#[derive(Debug, Clone)]
pub struct Gcusum {
    core: GlrCore,
    threshold: f64,
}

impl Gcusum {
    /// Finite family; the statistic is `max_k C_n(theta_k)`.
    pub fn finite(
        members: &[Density],
        pre: &Density,
        params: &DetectorParams,
    ) -> Result<Self, DetectorError> {
        params.check_threshold(true)?;
        if members.is_empty() {
            return Err(DetectorError::InvalidParams(
                "empty post-change family".into(),
            ));
        }
        Ok(Gcusum {
            core: GlrCore::finite(members, pre),
            threshold: params.threshold,
        })
    }

    /// Exponential family; `params.window` caps the number of start hypotheses.
    pub fn exponential(
        fam: &ExponentialFamilySpec,
        params: &DetectorParams,
    ) -> Result<Self, DetectorError> {
        params.check_threshold(true)?;
        params.check_window()?;
        Ok(Gcusum {
            core: GlrCore::exponential(fam, params.window)?,
            threshold: params.threshold,
        })
    }

    pub fn finite_state(&self) -> Option<&FiniteGcusumState> {
        self.core.finite_state()
    }

    pub fn exp_state(&self) -> Option<&ExpFamilyGcusumState> {
        self.core.exp_state()
    }

    pub(crate) fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Detector for Gcusum {
    fn wants_sample(&self) -> bool {
        true
    }

    fn step(&mut self, observation: Option<f64>) -> Result<StepOutcome, DetectorError> {
        let x = expect_sample(observation)?;
        let g = self.core.update(x)?;
        Ok(StepOutcome::new(true, g, self.threshold))
    }

    fn statistic(&self) -> f64 {
        self.core.statistic()
    }

    fn reset(&mut self) {
        self.core.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::Cusum;
    use crate::distributions::glr_sup;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn componentwise_update() {
        let mut s = FiniteGcusumState::new(2);
        let out = s.step(&[0.42, -0.08], 10.0).unwrap();
        assert_eq!(s.values().collect::<Vec<_>>(), vec![0.42, 0.0]);
        assert_eq!(out.statistic, 0.42);
        assert!(matches!(
            s.step(&[0.1], 10.0),
            Err(DetectorError::LengthMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn single_member_equals_cusum() {
        let f0 = Density::gaussian(0.0);
        let f1 = Density::gaussian(0.6);
        let p = DetectorParams::new(5.0);
        let mut g = Gcusum::finite(&[f1], &f0, &p).unwrap();
        let mut c = Cusum::new(&f1, &f0, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2_000 {
            let x: f64 = rng.sample(StandardNormal);
            let a = g.step(Some(x)).unwrap();
            let b = c.step(Some(x)).unwrap();
            assert_eq!(a, b);
        }
    }

    fn fam() -> ExponentialFamilySpec {
        ExponentialFamilySpec::new(BaseFamily::Gaussian, 0.2, 1.0, 0.0).unwrap()
    }

    #[test]
    fn first_observation_examples() {
        let mut s = ExpFamilyGcusumState::new(None);
        let out = s.step(1.0, &fam(), 10.0).unwrap();
        assert!((out.statistic - 0.5).abs() < 1e-12);
        assert_eq!(s.hypotheses().len(), 1);

        let mut s = ExpFamilyGcusumState::new(None);
        let out = s.step(-1.0, &fam(), 10.0).unwrap();
        assert!((out.statistic + 0.22).abs() < 1e-12);
    }

    #[test]
    fn unit_window_sees_only_latest_observation() {
        let mut s = ExpFamilyGcusumState::new(Some(1));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let x: f64 = 0.5 + rng.sample::<f64, _>(StandardNormal);
            let out = s.step(x, &fam(), 100.0).unwrap();
            let expect = glr_sup(x, 1, &fam()).unwrap().value;
            assert_eq!(out.statistic, expect);
            assert_eq!(s.hypotheses().len(), 1);
        }
    }

    /// `max_{n-w < k <= n} sup_theta sum_{i=k}^n (theta x_i - b(theta))` by direct enumeration.
    fn brute_force(xs: &[f64], fam: &ExponentialFamilySpec, window: Option<usize>) -> f64 {
        let n = xs.len();
        let first = window.map_or(0, |w| n.saturating_sub(w));
        (first..n)
            .map(|k| {
                let sum: f64 = xs[k..].iter().sum();
                glr_sup(sum, (n - k) as u64, fam).unwrap().value
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn pruned_statistic_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (base, window) in [
            (BaseFamily::Gaussian, None),
            (BaseFamily::Gaussian, Some(7)),
            (BaseFamily::Poisson, None),
            (BaseFamily::Poisson, Some(5)),
        ] {
            let fam = ExponentialFamilySpec::new(base, 0.2, 1.0, 0.0).unwrap();
            for _ in 0..20 {
                let mut s = ExpFamilyGcusumState::new(window);
                let mut xs = Vec::new();
                let shift: f64 = rng.random_range(-0.5..1.5);
                for _ in 0..60 {
                    let x = match base {
                        BaseFamily::Gaussian => shift + rng.sample::<f64, _>(StandardNormal),
                        BaseFamily::Poisson => fam.member(shift.max(0.0)).sample(&mut rng),
                    };
                    xs.push(x);
                    let out = s.step(x, &fam, 1e9).unwrap();
                    let oracle = brute_force(&xs, &fam, window);
                    assert!(
                        (out.statistic - oracle).abs() < 1e-9,
                        "{} vs {oracle}",
                        out.statistic
                    );
                    assert!(s.hypotheses().len() <= window.unwrap_or(usize::MAX));
                    assert!(s.hypotheses().len() as u64 <= s.observed());
                }
            }
        }
    }

    #[test]
    fn requires_positive_threshold() {
        let f0 = Density::gaussian(0.0);
        assert!(Gcusum::finite(&[Density::gaussian(0.5)], &f0, &DetectorParams::new(0.0)).is_err());
        assert!(Gcusum::exponential(&fam(), &DetectorParams::new(0.0)).is_err());
        assert!(Gcusum::exponential(&fam(), &DetectorParams::new(1.0).with_window(0)).is_err());
    }
}
