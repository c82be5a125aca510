//! Stochastic state-space systems.
//!
//! A system evolves a hidden state `x(t)` over the horizon `t = 0..=T`:
//!
//! ```text
//! x(t+1) = f_t(x(t), w(t))      t = 0..T-1
//! y(t)   = g_t(x(t), v(t))      at measurement times only
//! z(t)   = h_t(x(t))            t = 0..=T
//! x(0)   ~ F
//! ```
//!
//! [`SystemModel`] is the contract the filter and objective are written
//! against. The raw sampling methods take an explicit [`Noise`] source; the
//! checked wrappers ([`SystemModel::transition`], [`SystemModel::measure`],
//! [`SystemModel::importance_transition`]) validate the time index.

mod benchmark;
mod counterexample;
mod linear;
mod tumor;

pub use benchmark::BenchmarkModel;
pub use counterexample::CounterexampleModel;
pub use linear::LinearGaussianModel;
pub use tumor::{TumorModel, TumorParams};

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::noise::Noise;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Fixed-size real vector used for states, measurements and outputs.
pub trait Vector: Copy + Debug + PartialEq + Send + Sync + 'static {
    const DIM: usize;

    fn zero() -> Self;

    /// `self += scale * other`
    fn add_scaled(&mut self, other: &Self, scale: f64);

    fn squared_distance(&self, other: &Self) -> f64;

    fn as_slice(&self) -> &[f64];
}

impl Vector for f64 {
    const DIM: usize = 1;

    fn zero() -> Self {
        0.0
    }

    #[inline]
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        *self += scale * other;
    }

    #[inline]
    fn squared_distance(&self, other: &Self) -> f64 {
        let d = self - other;
        d * d
    }

    fn as_slice(&self) -> &[f64] {
        std::slice::from_ref(self)
    }
}

impl<const N: usize> Vector for [f64; N] {
    const DIM: usize = N;

    fn zero() -> Self {
        [0.0; N]
    }

    #[inline]
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += scale * b;
        }
    }

    #[inline]
    fn squared_distance(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn as_slice(&self) -> &[f64] {
        self
    }
}

/// Discrete-time stochastic system with partial, noisy measurements.
///
/// Implementations are immutable after construction and shared freely
/// between workers; all randomness enters through the `noise` argument.
pub trait SystemModel: Send + Sync {
    type State: Vector;
    type Measurement: Vector;
    type Output: Vector;

    /// Final time index `T` (inclusive).
    fn horizon(&self) -> usize;

    fn sample_initial(&self, noise: &mut impl Noise) -> Self::State;

    /// `f_t(x, w)` with `w` drawn from `noise`. Caller guarantees `t < T`.
    fn propagate(&self, t: usize, x: &Self::State, noise: &mut impl Noise) -> Self::State;

    /// `g_t(x, v)` with `v` drawn from `noise`. Caller guarantees `t <= T`.
    fn observe(&self, t: usize, x: &Self::State, noise: &mut impl Noise) -> Self::Measurement;

    /// `h_t(x)`
    fn output(&self, t: usize, x: &Self::State) -> Self::Output;

    /// `log p(y | x)` at time `t`.
    fn log_likelihood(&self, t: usize, x: &Self::State, y: &Self::Measurement) -> f64;

    /// Draw from the particle filter's importance density together with the
    /// log-weight increment it requires. Defaults to the prior dynamics.
    fn propose(&self, t: usize, x: &Self::State, noise: &mut impl Noise) -> (Self::State, f64) {
        (self.propagate(t, x, noise), 0.0)
    }

    fn state_dim(&self) -> usize {
        Self::State::DIM
    }

    fn meas_dim(&self) -> usize {
        Self::Measurement::DIM
    }

    fn output_dim(&self) -> usize {
        Self::Output::DIM
    }

    fn transition(&self, t: usize, x: &Self::State, noise: &mut impl Noise) -> Result<Self::State> {
        check_before_horizon(t, self.horizon())?;
        Ok(self.propagate(t, x, noise))
    }

    fn measure(&self, t: usize, x: &Self::State, noise: &mut impl Noise) -> Result<Self::Measurement> {
        check_within_horizon(t, self.horizon())?;
        Ok(self.observe(t, x, noise))
    }

    fn importance_transition(
        &self,
        t: usize,
        x: &Self::State,
        noise: &mut impl Noise,
    ) -> Result<(Self::State, f64)> {
        check_before_horizon(t, self.horizon())?;
        Ok(self.propose(t, x, noise))
    }
}

pub(crate) fn check_before_horizon(t: usize, horizon: usize) -> Result<()> {
    if t >= horizon {
        return Err(Error::OutOfHorizon { t, horizon });
    }
    Ok(())
}

pub(crate) fn check_within_horizon(t: usize, horizon: usize) -> Result<()> {
    if t > horizon {
        return Err(Error::OutOfHorizon { t, horizon });
    }
    Ok(())
}

/// `min(max(x, lo), hi)`
pub fn clip(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::invalid(format!("clip bounds lo={lo} > hi={hi}")));
    }
    Ok(x.max(lo).min(hi))
}

/// Log-density of `N(mean, sigma^2)` at `y`. With `sigma == 0` the density is
/// a point mass: `0` on an exact match, `-inf` otherwise.
#[inline]
pub fn gaussian_log_density(y: f64, mean: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if y == mean { 0.0 } else { f64::NEG_INFINITY };
    }
    let r = (y - mean) / sigma;
    -0.5 * r * r - sigma.ln() - LN_SQRT_2PI
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clip_examples() {
        assert_eq!(clip(25.0, 8.8, 24.0).unwrap(), 24.0);
        assert_eq!(clip(10.0, 8.8, 24.0).unwrap(), 10.0);
        assert_eq!(clip(-7.0, -5.8, 5.8).unwrap(), -5.8);
        assert!(matches!(clip(0.0, 1.0, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gaussian_peak() {
        assert_relative_eq!(gaussian_log_density(3.0, 3.0, 1.0), -(2.0 * std::f64::consts::PI).sqrt().ln());
        assert!(gaussian_log_density(3.5, 3.0, 1.0) < gaussian_log_density(3.0, 3.0, 1.0));
        assert_eq!(gaussian_log_density(1.0, 2.0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn array_vector_ops() {
        let mut a = [1.0, 2.0];
        a.add_scaled(&[1.0, 1.0], 2.0);
        assert_eq!(a, [3.0, 4.0]);
        assert_eq!(a.squared_distance(&[0.0, 0.0]), 25.0);
        assert_eq!(<[f64; 3]>::DIM, 3);
    }
}
