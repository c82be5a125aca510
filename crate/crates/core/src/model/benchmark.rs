use serde::{Deserialize, Serialize};

use super::{gaussian_log_density, require, SystemModel};
use crate::error::Result;
use crate::noise::Noise;

/// The scalar nonlinear growth model widely used to benchmark particle
/// filters:
///
/// ```text
/// x(t+1) = x/2 + 25 x / (1 + x^2) + 8 cos(1.2 t) + w,   w ~ N(0, sigma_w^2)
/// y(t)   = x^2 / 20 + v,                                 v ~ N(0, (sin(0.25 t) + 2)^2)
/// z(t)   = x
/// x(0)   ~ N(0, sigma_x0^2)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkModel {
    pub sigma_w: f64,
    pub sigma_x0: f64,
    pub horizon: usize,
}

impl Default for BenchmarkModel {
    fn default() -> Self {
        BenchmarkModel { sigma_w: 1.0, sigma_x0: 5.0, horizon: 30 }
    }
}

impl BenchmarkModel {
    pub fn new(sigma_w: f64, sigma_x0: f64, horizon: usize) -> Result<Self> {
        let m = BenchmarkModel { sigma_w, sigma_x0, horizon };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.sigma_w >= 0.0, || format!("sigma_w={} must be non-negative", self.sigma_w))?;
        require(self.sigma_x0 >= 0.0, || format!("sigma_x0={} must be non-negative", self.sigma_x0))?;
        require(self.horizon >= 1, || "horizon must be at least 1".into())
    }

    /// Time-varying measurement noise standard deviation.
    #[inline]
    pub fn sigma_v(t: usize) -> f64 {
        (0.25 * t as f64).sin() + 2.0
    }

    #[inline]
    pub fn transition_with_noise(&self, t: usize, x: f64, w: f64) -> f64 {
        x / 2.0 + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * t as f64).cos() + w
    }

    #[inline]
    pub fn measure_with_noise(&self, x: f64, v: f64) -> f64 {
        x * x / 20.0 + v
    }
}

impl SystemModel for BenchmarkModel {
    type State = f64;
    type Measurement = f64;
    type Output = f64;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial(&self, noise: &mut impl Noise) -> f64 {
        self.sigma_x0 * noise.normal()
    }

    #[inline]
    fn propagate(&self, t: usize, x: &f64, noise: &mut impl Noise) -> f64 {
        self.transition_with_noise(t, *x, self.sigma_w * noise.normal())
    }

    #[inline]
    fn observe(&self, t: usize, x: &f64, noise: &mut impl Noise) -> f64 {
        self.measure_with_noise(*x, Self::sigma_v(t) * noise.normal())
    }

    #[inline]
    fn output(&self, _t: usize, x: &f64) -> f64 {
        *x
    }

    #[inline]
    fn log_likelihood(&self, t: usize, x: &f64, y: &f64) -> f64 {
        gaussian_log_density(*y, x * x / 20.0, Self::sigma_v(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ForcedNoise, Stream};
    use approx::assert_relative_eq;

    #[test]
    fn hand_evaluated_dynamics() {
        let m = BenchmarkModel::default();
        let mut zero = ForcedNoise::zeros();
        assert_eq!(m.transition(0, &0.0, &mut zero).unwrap(), 8.0);
        assert_eq!(m.measure(0, &10.0, &mut zero).unwrap(), 5.0);
        assert_eq!(m.measure(4, &0.0, &mut zero).unwrap(), 0.0);
        assert_eq!(m.output(7, &3.7), 3.7);
    }

    #[test]
    fn degenerate_initial() {
        let m = BenchmarkModel::new(1.0, 0.0, 30).unwrap();
        assert_eq!(m.sample_initial(&mut Stream::from_seed(4)), 0.0);
    }

    #[test]
    fn initial_mean_clt() {
        let m = BenchmarkModel::default();
        let mut s = Stream::from_seed(11);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| m.sample_initial(&mut s)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * 5.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn likelihood_peak() {
        let m = BenchmarkModel::default();
        let peak = m.log_likelihood(0, &3.0, &(9.0 / 20.0));
        assert_relative_eq!(peak, -(2.0 * (2.0 * std::f64::consts::PI).sqrt()).ln(), epsilon = 1e-12);
        assert!(m.log_likelihood(0, &3.0, &(9.0 / 20.0 - 0.1)) < peak);
    }

    #[test]
    fn sigma_v_bounded_below() {
        assert!((0..1000).all(|t| BenchmarkModel::sigma_v(t) >= 1.0));
    }

    #[test]
    fn proposal_matches_prior() {
        let m = BenchmarkModel::default();
        let a = m.transition(3, &1.5, &mut Stream::from_seed(2)).unwrap();
        let (b, inc) = m.importance_transition(3, &1.5, &mut Stream::from_seed(2)).unwrap();
        assert_eq!((a, 0.0), (b, inc));
    }

    #[test]
    fn measurement_noise_std_matches() {
        let m = BenchmarkModel::default();
        let n = 100_000;
        for t in 0..=30 {
            let mut s = Stream::from_seed(100 + t as u64);
            let x = 2.0;
            let h = x * x / 20.0;
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let e = m.observe(t, &x, &mut s) - h;
                s1 += e;
                s2 += e * e;
            }
            let mean = s1 / n as f64;
            let sd = (s2 / n as f64 - mean * mean).sqrt();
            let sigma = BenchmarkModel::sigma_v(t);
            // standard error of the sample sd of a Gaussian is sigma / sqrt(2n)
            assert!((sd - sigma).abs() < 3.0 * sigma / (2.0 * n as f64).sqrt(), "t={t} sd={sd} sigma={sigma}");
        }
    }
}
