use super::gcusum::GlrCore;
use super::{
    expect_no_sample, expect_sample, DecusumState, Detector, DetectorError, DetectorParams,
    ExpFamilyGcusumState, FiniteGcusumState, StepOutcome,
};
use crate::distributions::{Density, ExponentialFamilySpec, FamilySpec, LlrFn, PostChange};

/// Joint state: the control statistic and the frozen-while-skipping detection statistic.
#[derive(Debug, Clone)]
pub struct GdecusumState {
    pub control: DecusumState,
    detect: GlrCore,
}

impl GdecusumState {
    pub fn finite_detect(&self) -> Option<&FiniteGcusumState> {
        self.detect.finite_state()
    }

    pub fn exp_detect(&self) -> Option<&ExpFamilyGcusumState> {
        self.detect.exp_state()
    }
}

/// GLR CuSum with on-off observation control by a DECuSum statistic on the
/// control density (the least favorable member, or any `g`).
///
/// For a finite family whose control density is a member, the stopping
/// statistic is `max{W_n, max_{k != *} C_n(theta_k)}`; the CuSum statistic of
/// the control member is replaced by `W_n`. Otherwise it is the GLR statistic
/// over the sampled observations. The detection statistics are not updated on
/// skipped steps.
#[derive(Debug, Clone)]
pub struct Gdecusum {
    control_llr: LlrFn,
    state: GdecusumState,
    params: DetectorParams,
    /// Whether `W_n` stands in for the control member in the stopping statistic.
    control_in_statistic: bool,
}

impl Gdecusum {
    pub fn new(family: &FamilySpec, params: &DetectorParams) -> Result<Self, DetectorError> {
        params.check_threshold(true)?;
        params.check_control()?;
        params.check_window()?;
        let control = *family.control();
        let pre = *family.pre();
        let (detect, control_in_statistic) = match family.post() {
            PostChange::Finite { members } => match family.control_index() {
                Some(star) => {
                    let others: Vec<Density> = members
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != star)
                        .map(|(_, m)| *m)
                        .collect();
                    (GlrCore::finite(&others, &pre), true)
                }
                None => (GlrCore::finite(members, &pre), false),
            },
            PostChange::Exponential(fam) => (GlrCore::exponential(fam, params.window)?, false),
        };
        Ok(Gdecusum {
            control_llr: control.llr_against(&pre),
            state: GdecusumState {
                control: DecusumState::default(),
                detect,
            },
            params: *params,
            control_in_statistic,
        })
    }

    /// Finite Gaussian convenience constructor.
    pub fn finite(family: &FamilySpec, params: &DetectorParams) -> Result<Self, DetectorError> {
        Gdecusum::new(family, params)
    }

    /// Exponential-family constructor with least favorable parameter `theta_star`.
    pub fn exponential(
        fam: &ExponentialFamilySpec,
        theta_star: f64,
        params: &DetectorParams,
    ) -> Result<Self, DetectorError> {
        let family = FamilySpec::exponential(*fam, theta_star)?;
        Gdecusum::new(&family, params)
    }

    pub fn state(&self) -> &GdecusumState {
        &self.state
    }

    fn current_statistic(&self) -> f64 {
        let g = self.state.detect.statistic();
        if self.control_in_statistic {
            g.max(self.state.control.value())
        } else {
            g
        }
    }
}

impl Detector for Gdecusum {
    fn wants_sample(&self) -> bool {
        self.state.control.wants_sample()
    }

    fn step(&mut self, observation: Option<f64>) -> Result<StepOutcome, DetectorError> {
        let sampling = self.state.control.wants_sample();
        if sampling {
            let x = expect_sample(observation)?;
            let z = self.control_llr.eval(x)?;
            // All ratios are validated before the detection state is touched,
            // so a failure here leaves both halves unchanged.
            self.state.detect.update(x)?;
            self.state
                .control
                .sample(z, self.params.h, self.params.mu)?;
        } else {
            expect_no_sample(observation)?;
            self.state.control.skip(self.params.mu);
        }
        Ok(StepOutcome::new(
            sampling,
            self.current_statistic(),
            self.params.threshold,
        ))
    }

    fn statistic(&self) -> f64 {
        self.current_statistic()
    }

    fn reset(&mut self) {
        self.state.control = DecusumState::default();
        self.state.detect.reset();
    }
}
