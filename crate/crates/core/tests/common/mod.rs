//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const THETAS: [f64; 4] = [0.4, 0.6, 0.8, 1.0];

/// `theta x - theta^2 / 2`, the unit-variance Gaussian log-likelihood ratio against N(0, 1).
pub fn gauss_llr(theta: f64, x: f64) -> f64 {
    theta * x - 0.5 * theta * theta
}

/// Gaussian stream whose mean switches from 0 to `shift` at index `change` (0-based).
pub fn stream(seed: u64, len: usize, change: usize, shift: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            if i >= change {
                z + shift
            } else {
                z
            }
        })
        .collect()
}

/// `max(0, max_{theta, k <= n} sum_{i=k}^{n} llr_theta(x_i))` by direct enumeration.
pub fn windowed_max(xs: &[f64], thetas: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for &t in thetas {
        for k in 0..xs.len() {
            let s: f64 = xs[k..].iter().map(|&x| gauss_llr(t, x)).sum();
            best = best.max(s);
        }
    }
    best
}

/// Per-step output of the reference data-efficient detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefStep {
    pub sampled: bool,
    pub w: f64,
    /// Windowed max over sampled observations of the non-control members.
    pub others: f64,
}

impl RefStep {
    pub fn statistic(&self) -> f64 {
        self.w.max(self.others)
    }
}

/// Two-threshold control statistic on `theta_star`, written directly from
/// its definition: after a sample that leaves `w < 0`, skip exactly
/// `ceil(|w| / mu)` steps while `w` ramps up by `mu`, then restart at 0.
/// The detection part is recomputed by enumeration over sampled indices,
/// skipped indices contributing nothing.
pub fn reference_gdecusum(
    xs: &[f64],
    thetas: &[f64],
    star: usize,
    mu: f64,
    h: f64,
) -> Vec<RefStep> {
    let others: Vec<f64> = thetas
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != star)
        .map(|(_, &t)| t)
        .collect();
    let mut w = 0.0f64;
    let mut skips_left = 0u64;
    let mut sampled_xs = Vec::new();
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let sampled = skips_left == 0;
        if sampled {
            sampled_xs.push(x);
            w = (w + gauss_llr(thetas[star], x)).max(-h);
            if w < 0.0 {
                skips_left = ((-w / mu).ceil() as u64).max(1);
            }
        } else {
            skips_left -= 1;
            w = if skips_left == 0 {
                0.0
            } else {
                (w + mu).min(0.0)
            };
        }
        out.push(RefStep {
            sampled,
            w,
            others: if others.is_empty() {
                f64::NEG_INFINITY
            } else {
                windowed_max(&sampled_xs, &others)
            },
        });
    }
    out
}
