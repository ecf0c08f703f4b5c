//! Command-line driver for trade-off experiments.

mod commands;
pub mod config;
pub mod output;

pub use commands::{check_family, curve, engine, load, pdc, simulate, CliError, Options};
