use serde::{Deserialize, Serialize};

use super::{
    expect_no_sample, expect_sample, Detector, DetectorError, DetectorParams, StepOutcome,
    Truncation,
};
use crate::distributions::{Density, LlrFn};

/// Two-threshold data-efficient CuSum statistic.
///
/// While `w >= 0` the next observation is taken and `w <- max(w + llr, -h)`.
/// While `w < 0` observations are skipped and `w <- min(w + mu, 0)`. A skip
/// run started from undershoot `w` lasts exactly `ceil(|w| / mu)` steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecusumState {
    w: f64,
    /// Remaining steps of the current skip run; zero while sampling.
    skips_left: u64,
}

impl DecusumState {
    /// State with statistic `w`, with the skip count implied by `mu`.
    pub fn with_value(w: f64, mu: f64) -> Self {
        DecusumState {
            w,
            skips_left: skip_run_length(w, mu),
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn wants_sample(&self) -> bool {
        self.w >= 0.0
    }

    #[inline]
    pub fn is_skipping(&self) -> bool {
        self.w < 0.0
    }

    /// Sampled update with a log-likelihood ratio.
    #[inline]
    pub(crate) fn sample(
        &mut self,
        llr: f64,
        h: Truncation,
        mu: f64,
    ) -> Result<f64, DetectorError> {
        if !llr.is_finite() {
            return Err(DetectorError::NonFiniteLlr(llr));
        }
        self.w = h.apply(self.w + llr);
        self.skips_left = skip_run_length(self.w, mu);
        Ok(self.w)
    }

    /// Skipped update: ramp toward zero by `mu`.
    #[inline]
    pub(crate) fn skip(&mut self, mu: f64) -> f64 {
        self.skips_left = self.skips_left.saturating_sub(1);
        let next = (self.w + mu).min(0.0);
        if self.skips_left == 0 || next >= 0.0 {
            self.w = 0.0;
            self.skips_left = 0;
        } else {
            self.w = next;
        }
        self.w
    }

    /// One step of the recursion. `llr` must be present iff `w >= 0`.
    pub fn step(
        &mut self,
        params: &DetectorParams,
        llr: Option<f64>,
    ) -> Result<StepOutcome, DetectorError> {
        let sampling = self.wants_sample();
        let w = match (sampling, llr) {
            (true, Some(z)) => self.sample(z, params.h, params.mu)?,
            (true, None) => return Err(DetectorError::MissingSample),
            (false, Some(_)) => return Err(DetectorError::UnexpectedSample),
            (false, None) => self.skip(params.mu),
        };
        Ok(StepOutcome::new(sampling, w, params.threshold))
    }
}

/// `ceil(|w| / mu)` for `w < 0`, else zero.
#[inline]
pub(crate) fn skip_run_length(w: f64, mu: f64) -> u64 {
    if w < 0.0 {
        // `as` saturates for huge ratios (h = inf).
        ((-w / mu).ceil() as u64).max(1)
    } else {
        0
    }
}

/// DECuSum test of `target` against `pre`.
#[derive(Debug, Clone)]
pub struct Decusum {
    llr: LlrFn,
    state: DecusumState,
    params: DetectorParams,
}

impl Decusum {
    pub fn new(
        target: &Density,
        pre: &Density,
        params: &DetectorParams,
    ) -> Result<Self, DetectorError> {
        params.check_threshold(false)?;
        params.check_control()?;
        Ok(Decusum {
            llr: target.llr_against(pre),
            state: DecusumState::default(),
            params: *params,
        })
    }

    pub fn state(&self) -> &DecusumState {
        &self.state
    }
}

impl Detector for Decusum {
    fn wants_sample(&self) -> bool {
        self.state.wants_sample()
    }

    fn step(&mut self, observation: Option<f64>) -> Result<StepOutcome, DetectorError> {
        let llr = if self.state.wants_sample() {
            let x = expect_sample(observation)?;
            Some(self.llr.eval(x)?)
        } else {
            expect_no_sample(observation)?;
            None
        };
        self.state.step(&self.params, llr)
    }

    fn statistic(&self) -> f64 {
        self.state.value()
    }

    fn reset(&mut self) {
        self.state = DecusumState::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, h: Truncation) -> DetectorParams {
        DetectorParams::new(100.0).with_mu(mu).with_h(h)
    }

    #[test]
    fn truncated_undershoot_then_exact_skip_run() {
        let p = params(0.18, Truncation::Finite(10.0));
        let mut s = DecusumState::default();
        let out = s.step(&p, Some(-12.0)).unwrap();
        assert_eq!(out.statistic, -10.0);
        assert!(out.requested_sample);
        let mut skips = 0;
        while s.is_skipping() {
            let out = s.step(&p, None).unwrap();
            assert!(!out.requested_sample);
            skips += 1;
        }
        assert_eq!(skips, 56);
        assert_eq!(s.value(), 0.0);
        assert!(s.wants_sample());
    }

    #[test]
    fn zero_depth_never_skips() {
        let p = params(0.5, Truncation::Finite(0.0));
        let mut s = DecusumState::default();
        for z in [-1.0, 0.3, -5.0, 2.0, -0.1] {
            let before = s.value();
            let out = s.step(&p, Some(z)).unwrap();
            assert_eq!(out.statistic, (before + z).max(0.0));
            assert!(s.wants_sample());
        }
    }

    #[test]
    fn ramp_is_capped_at_zero() {
        let p = params(0.18, Truncation::Infinite);
        let mut s = DecusumState::with_value(-0.05, 0.18);
        let out = s.step(&p, None).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert!(s.wants_sample());
    }

    #[test]
    fn contract_violations() {
        let p = params(0.18, Truncation::Infinite);
        let mut s = DecusumState::default();
        assert_eq!(s.step(&p, None), Err(DetectorError::MissingSample));
        let mut s = DecusumState::with_value(-1.0, 0.18);
        assert_eq!(s.step(&p, Some(0.2)), Err(DetectorError::UnexpectedSample));
    }

    #[test]
    fn skip_run_never_exceeds_bound_under_rounding() {
        // mu values that are not exactly representable.
        for &(h, mu) in &[
            (1.0, 0.1),
            (0.3, 0.1),
            (2.0, 0.2),
            (0.7, 0.07),
            (12.5, 0.08),
        ] {
            let p = params(mu, Truncation::Finite(h));
            let bound = Truncation::Finite(h).max_skip_run(mu).unwrap();
            let mut s = DecusumState::default();
            s.step(&p, Some(-1e9)).unwrap();
            let mut run = 0;
            while s.is_skipping() {
                s.step(&p, None).unwrap();
                run += 1;
            }
            assert!(run <= bound, "h={h} mu={mu}: {run} > {bound}");
        }
    }

    #[test]
    fn detector_matches_state_machine() {
        let f0 = Density::gaussian(0.0);
        let p = DetectorParams::new(3.0)
            .with_mu(0.2)
            .with_h(Truncation::Finite(2.0));
        let mut d = Decusum::new(&Density::gaussian(0.5), &f0, &p).unwrap();
        // llr(-4) = -2.125, truncated at -2.
        let out = d.step(Some(-4.0)).unwrap();
        assert_eq!(out.statistic, -2.0);
        assert!(!d.wants_sample());
        assert_eq!(d.step(Some(1.0)), Err(DetectorError::UnexpectedSample));
        for _ in 0..10 {
            assert!(!d.step(None).unwrap().requested_sample);
        }
        assert!(d.wants_sample());
    }
}
