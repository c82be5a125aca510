//! Measurement-time selection for intermittent particle filtering.
//!
//! Given a stochastic system observed at most `N` times over the horizon
//! `0..=T`, choose the measurement times that minimize the expected
//! cumulative filtering error of a particle filter.
//!
//! - [`model`]: system contract and the bundled systems.
//! - [`filter`]: intermittent SIR particle filter.
//! - [`objective`]: Monte-Carlo estimate of the expected cumulative error of
//!   a candidate schedule, optionally conditioned on measurements already
//!   acquired.
//! - [`optimizers`]: random trial, greedy forward/backward, simulated
//!   annealing, genetic algorithm and exhaustive search over schedules.
//! - [`experiments`]: offline and online scheduling pipelines, gain
//!   statistics, the adaptive-policy counterexample and the Kalman oracle.
//! - [`config`] and [`cli`]: configuration files and the command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod model;
pub mod noise;
pub mod objective;
pub mod optimizers;

pub use error::{Error, Result};
pub use filter::{run_filter, Schedule};
pub use noise::{Noise, StreamKey};
pub use objective::{estimate_cost, AcquiredPrefix, ObjectiveEstimate};

/// Decimal rendering with 17 significant digits, stable across platforms.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}
