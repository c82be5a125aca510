use serde::{Deserialize, Serialize};

use super::{gaussian_log_density, require, SystemModel};
use crate::error::Result;
use crate::noise::Noise;

/// Three-step system where an adaptive measurement policy beats every fixed
/// schedule.
///
/// `x(0)` is `+1` or `-1` with equal probability. If `x(0) = 1` then
/// `x(1) ~ U(-6, 6)` and `x(2) = 0`; otherwise `x(1) = 0` and
/// `x(2) ~ U(-6, 6)`. The output is the state itself.
///
/// The ideal system is observed exactly. A particle filter cannot condition
/// on an exact observation of a continuous variable, so measurements carry a
/// small Gaussian noise of standard deviation `measurement_sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleModel {
    pub measurement_sigma: f64,
    /// Half-width of the uniform jump.
    pub jump: f64,
}

impl Default for CounterexampleModel {
    fn default() -> Self {
        CounterexampleModel { measurement_sigma: 0.01, jump: 6.0 }
    }
}

impl CounterexampleModel {
    pub fn new(measurement_sigma: f64) -> Result<Self> {
        let m = CounterexampleModel { measurement_sigma, ..Self::default() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.measurement_sigma >= 0.0, || {
            format!("measurement_sigma={} must be non-negative", self.measurement_sigma)
        })?;
        require(self.jump > 0.0, || format!("jump={} must be positive", self.jump))
    }

    /// Dynamics with the uniform draw `u` in `[0, 1)` given explicitly.
    pub fn transition_with_noise(&self, t: usize, x: f64, u: f64) -> f64 {
        let jump = self.jump * (2.0 * u - 1.0);
        match t {
            0 if x > 0.0 => jump,
            0 => 0.0,
            _ if x != 0.0 => 0.0,
            _ => jump,
        }
    }
}

impl SystemModel for CounterexampleModel {
    type State = f64;
    type Measurement = f64;
    type Output = f64;

    fn horizon(&self) -> usize {
        2
    }

    fn sample_initial(&self, noise: &mut impl Noise) -> f64 {
        if noise.uniform() < 0.5 {
            1.0
        } else {
            -1.0
        }
    }

    fn propagate(&self, t: usize, x: &f64, noise: &mut impl Noise) -> f64 {
        self.transition_with_noise(t, *x, noise.uniform())
    }

    fn observe(&self, _t: usize, x: &f64, noise: &mut impl Noise) -> f64 {
        x + self.measurement_sigma * noise.normal()
    }

    fn output(&self, _t: usize, x: &f64) -> f64 {
        *x
    }

    fn log_likelihood(&self, _t: usize, x: &f64, y: &f64) -> f64 {
        gaussian_log_density(*y, *x, self.measurement_sigma)
    }
}
