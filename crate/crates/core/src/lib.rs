//! Quickest change detection with on-off observation control.
//!
//! [`distributions`] holds the density models and likelihood machinery,
//! [`detectors`] the streaming CuSum-family state machines, and
//! [`simulation`] the Monte Carlo estimators of false alarm rate, delay and
//! pre-change duty cycle.

pub mod detectors;
pub mod distributions;
pub mod simulation;
