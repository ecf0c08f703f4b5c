use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{expect_no_sample, Detector, DetectorError, Gcusum, SkipPattern, StepOutcome};

/// GLR CuSum fed by a data-independent sampling pattern.
///
/// On skipped steps the inner statistic is frozen. The Bernoulli pattern
/// draws its coin for step `n + 1` right after step `n`, from the detector's
/// own stream, so the decision never depends on the skipped value.
#[derive(Debug, Clone)]
pub struct Fractional {
    inner: Gcusum,
    pattern: SkipPattern,
    /// Index of the next step, starting at 1.
    next_step: u64,
    next_keep: bool,
    coin: ChaCha8Rng,
    coin_seed: (u64, u64),
}

impl Fractional {
    /// `coin_seed` is `(key, stream)` for the Bernoulli coin; ignored by periodic patterns.
    pub fn new(
        inner: Gcusum,
        pattern: SkipPattern,
        coin_seed: (u64, u64),
    ) -> Result<Self, DetectorError> {
        match pattern {
            SkipPattern::Periodic { period: 0 } => {
                return Err(DetectorError::InvalidParams(
                    "skip period must be >= 1".into(),
                ));
            }
            SkipPattern::Bernoulli {
                keep_probability: p,
            } if !(0.0..=1.0).contains(&p) => {
                return Err(DetectorError::InvalidParams(format!(
                    "keep probability must lie in [0, 1], got {p}"
                )));
            }
            _ => {}
        }
        let coin = coin_rng(coin_seed);
        let mut d = Fractional {
            inner,
            pattern,
            next_step: 1,
            next_keep: false,
            coin,
            coin_seed,
        };
        d.next_keep = d.draw_keep();
        Ok(d)
    }

    fn draw_keep(&mut self) -> bool {
        match self.pattern {
            SkipPattern::Periodic { period } => (self.next_step - 1).is_multiple_of(period as u64),
            SkipPattern::Bernoulli { keep_probability } => self.coin.random_bool(keep_probability),
        }
    }

    pub fn inner(&self) -> &Gcusum {
        &self.inner
    }
}

fn coin_rng((key, stream): (u64, u64)) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

impl Detector for Fractional {
    fn wants_sample(&self) -> bool {
        self.next_keep
    }

    fn step(&mut self, observation: Option<f64>) -> Result<StepOutcome, DetectorError> {
        let keep = self.next_keep;
        let out = if keep {
            self.inner.step(observation)?
        } else {
            expect_no_sample(observation)?;
            StepOutcome::new(false, self.inner.statistic(), self.inner.threshold())
        };
        self.next_step += 1;
        self.next_keep = self.draw_keep();
        Ok(out)
    }

    fn statistic(&self) -> f64 {
        self.inner.statistic()
    }

    fn reset(&mut self) {
        self.inner.reset();
        self.coin = coin_rng(self.coin_seed);
        self.next_step = 1;
        self.next_keep = self.draw_keep();
    }
}
