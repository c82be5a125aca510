use serde::{Deserialize, Serialize};

use super::{gaussian_log_density, require, SystemModel};
use crate::error::Result;
use crate::noise::Noise;

/// Scalar linear-Gaussian system, the reference case where the Kalman
/// filter is exact:
///
/// ```text
/// x(t+1) = a x + w,  w ~ N(0, q)
/// y(t)   = c x + v,  v ~ N(0, r)
/// z(t)   = x
/// x(0)   ~ N(m0, p0)
/// ```
///
/// `q`, `r` and `p0` are variances. Zero variances give deterministic
/// dynamics, exact measurements or a point-mass prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearGaussianModel {
    pub a: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
    pub m0: f64,
    pub p0: f64,
    pub horizon: usize,
}

impl Default for LinearGaussianModel {
    /// Unit random walk observed in unit noise over `T = 10`.
    fn default() -> Self {
        LinearGaussianModel { a: 1.0, c: 1.0, q: 1.0, r: 1.0, m0: 0.0, p0: 1.0, horizon: 10 }
    }
}

impl LinearGaussianModel {
    pub fn random_walk(q: f64, r: f64, p0: f64, horizon: usize) -> Result<Self> {
        let m = LinearGaussianModel { q, r, p0, horizon, ..Self::default() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("r", self.r), ("p0", self.p0)] {
            require(v >= 0.0 && v.is_finite(), || format!("variance {name}={v} must be non-negative"))?;
        }
        require(self.horizon >= 1, || "horizon must be at least 1".into())
    }
}

impl SystemModel for LinearGaussianModel {
    type State = f64;
    type Measurement = f64;
    type Output = f64;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial(&self, noise: &mut impl Noise) -> f64 {
        self.m0 + self.p0.sqrt() * noise.normal()
    }

    #[inline]
    fn propagate(&self, _t: usize, x: &f64, noise: &mut impl Noise) -> f64 {
        self.a * x + self.q.sqrt() * noise.normal()
    }

    #[inline]
    fn observe(&self, _t: usize, x: &f64, noise: &mut impl Noise) -> f64 {
        self.c * x + self.r.sqrt() * noise.normal()
    }

    #[inline]
    fn output(&self, _t: usize, x: &f64) -> f64 {
        *x
    }

    #[inline]
    fn log_likelihood(&self, _t: usize, x: &f64, y: &f64) -> f64 {
        gaussian_log_density(*y, self.c * x, self.r.sqrt())
    }
}
