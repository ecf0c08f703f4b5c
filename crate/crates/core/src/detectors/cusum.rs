use serde::{Deserialize, Serialize};

use super::{expect_sample, Detector, DetectorError, DetectorParams, StepOutcome};
use crate::distributions::{Density, LlrFn};

/// Page's CuSum statistic `C_n = (C_{n-1} + llr_n)^+` for one fixed alternative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CusumState {
    c: f64,
}

impl CusumState {
    pub fn with_value(c: f64) -> Self {
        CusumState { c: c.max(0.0) }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c
    }

    #[inline]
    pub(crate) fn update(&mut self, llr: f64) -> Result<f64, DetectorError> {
        if !llr.is_finite() {
            return Err(DetectorError::NonFiniteLlr(llr));
        }
        self.c = (self.c + llr).max(0.0);
        Ok(self.c)
    }

    pub fn step(&mut self, llr: f64, threshold: f64) -> Result<StepOutcome, DetectorError> {
        let c = self.update(llr)?;
        Ok(StepOutcome::new(true, c, threshold))
    }
}

/// CuSum test of `target` against `pre`. Samples every step.
#[derive(Debug, Clone)]
pub struct Cusum {
    llr: LlrFn,
    state: CusumState,
    threshold: f64,
}

impl Cusum {
    pub fn new(
        target: &Density,
        pre: &Density,
        params: &DetectorParams,
    ) -> Result<Self, DetectorError> {
        params.check_threshold(false)?;
        Ok(Cusum {
            llr: target.llr_against(pre),
            state: CusumState::default(),
            threshold: params.threshold,
        })
    }

    pub fn state(&self) -> &CusumState {
        &self.state
    }
}

impl Detector for Cusum {
    fn wants_sample(&self) -> bool {
        true
    }

    fn step(&mut self, observation: Option<f64>) -> Result<StepOutcome, DetectorError> {
        let x = expect_sample(observation)?;
        let z = self.llr.eval(x)?;
        self.state.step(z, self.threshold)
    }

    fn statistic(&self) -> f64 {
        self.state.value()
    }

    fn reset(&mut self) {
        self.state = CusumState::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recursion_examples() {
        let mut s = CusumState::default();
        let out = s.step(0.42, 10.0).unwrap();
        assert_eq!(out.statistic, 0.42);
        assert!(out.requested_sample && !out.stopped);

        let mut s = CusumState::with_value(0.1);
        assert_eq!(s.step(-0.5, 10.0).unwrap().statistic, 0.0);

        let mut s = CusumState::with_value(4.5);
        let out = s.step(0.2, 4.6).unwrap();
        assert!((out.statistic - 4.7).abs() < 1e-12);
        assert!(out.stopped);
    }

    #[test]
    fn rejects_non_finite_llr() {
        let mut s = CusumState::default();
        assert!(matches!(
            s.step(f64::NAN, 1.0),
            Err(DetectorError::NonFiniteLlr(_))
        ));
        assert!(s.step(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn zero_threshold_stops_immediately() {
        let f0 = Density::gaussian(0.0);
        let mut d = Cusum::new(&Density::gaussian(0.6), &f0, &DetectorParams::new(0.0)).unwrap();
        assert!(d.step(Some(-3.0)).unwrap().stopped);
    }

    #[test]
    fn contract_requires_a_sample() {
        let f0 = Density::gaussian(0.0);
        let mut d = Cusum::new(&Density::gaussian(0.6), &f0, &DetectorParams::new(1.0)).unwrap();
        assert_eq!(d.step(None), Err(DetectorError::MissingSample));
        assert!(matches!(
            d.step(Some(f64::NAN)),
            Err(DetectorError::NonFiniteObservation(_))
        ));
    }
}
