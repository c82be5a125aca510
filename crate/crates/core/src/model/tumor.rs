use serde::{Deserialize, Serialize};

use super::{gaussian_log_density, require, SystemModel};
use crate::error::Result;
use crate::noise::Noise;

/// Parameters of the one-dimensional tumor motion model.
///
/// State is `[a, b, omega]`: amplitude and shift follow bounded random walks,
/// the angular frequency is drawn once and stays constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TumorParams {
    pub a_lo: f64,
    pub a_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    /// Step duration in seconds.
    pub delta: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_v: f64,
    /// Random-walk jitter on omega used by the filter's proposal only.
    pub sigma_omega: f64,
    pub horizon: usize,
}

impl Default for TumorParams {
    fn default() -> Self {
        TumorParams {
            a_lo: 8.8,
            a_hi: 24.0,
            b_lo: -5.8,
            b_hi: 5.8,
            w_lo: 1.3,
            w_hi: 2.1,
            delta: 0.25,
            sigma_a: 1.0,
            sigma_b: 1.0,
            sigma_v: 1.0,
            sigma_omega: 0.005,
            horizon: 30,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TumorModel {
    p: TumorParams,
}

impl TumorModel {
    pub fn new(p: TumorParams) -> Result<Self> {
        require(p.a_lo < p.a_hi, || format!("a_lo={} must be < a_hi={}", p.a_lo, p.a_hi))?;
        require(p.b_lo < p.b_hi, || format!("b_lo={} must be < b_hi={}", p.b_lo, p.b_hi))?;
        require(p.w_lo < p.w_hi, || format!("w_lo={} must be < w_hi={}", p.w_lo, p.w_hi))?;
        for (name, s) in [
            ("sigma_a", p.sigma_a),
            ("sigma_b", p.sigma_b),
            ("sigma_v", p.sigma_v),
            ("sigma_omega", p.sigma_omega),
            ("delta", p.delta),
        ] {
            require(s > 0.0 && s.is_finite(), || format!("{name}={s} must be positive"))?;
        }
        require(p.horizon >= 1, || "horizon must be at least 1".into())?;
        Ok(TumorModel { p })
    }

    pub fn params(&self) -> &TumorParams {
        &self.p
    }

    /// Dynamics with the process noise `(w_a, w_b)` given explicitly.
    pub fn transition_with_noise(&self, x: &[f64; 3], w_a: f64, w_b: f64) -> [f64; 3] {
        let p = &self.p;
        [(x[0] + w_a).clamp(p.a_lo, p.a_hi), (x[1] + w_b).clamp(p.b_lo, p.b_hi), x[2]]
    }

    /// Proposal dynamics with `(w_a, w_b, w_omega)` given explicitly.
    pub fn proposal_with_noise(&self, x: &[f64; 3], w_a: f64, w_b: f64, w_omega: f64) -> [f64; 3] {
        let mut next = self.transition_with_noise(x, w_a, w_b);
        next[2] = (x[2] + w_omega).clamp(self.p.w_lo, self.p.w_hi);
        next
    }

    /// Measurement with the noise `v` given explicitly.
    pub fn measure_with_noise(&self, t: usize, x: &[f64; 3], v: f64) -> f64 {
        self.position(t, x) + v
    }

    #[inline]
    fn position(&self, t: usize, x: &[f64; 3]) -> f64 {
        x[0] * (x[2] * t as f64 * self.p.delta).sin() + x[1]
    }
}

impl SystemModel for TumorModel {
    type State = [f64; 3];
    type Measurement = f64;
    type Output = f64;

    fn horizon(&self) -> usize {
        self.p.horizon
    }

    fn sample_initial(&self, noise: &mut impl Noise) -> [f64; 3] {
        let p = &self.p;
        [
            p.a_lo + (p.a_hi - p.a_lo) * noise.uniform(),
            p.b_lo + (p.b_hi - p.b_lo) * noise.uniform(),
            p.w_lo + (p.w_hi - p.w_lo) * noise.uniform(),
        ]
    }

    #[inline]
    fn propagate(&self, _t: usize, x: &[f64; 3], noise: &mut impl Noise) -> [f64; 3] {
        let w_a = self.p.sigma_a * noise.normal();
        let w_b = self.p.sigma_b * noise.normal();
        self.transition_with_noise(x, w_a, w_b)
    }

    #[inline]
    fn observe(&self, t: usize, x: &[f64; 3], noise: &mut impl Noise) -> f64 {
        self.measure_with_noise(t, x, self.p.sigma_v * noise.normal())
    }

    #[inline]
    fn output(&self, t: usize, x: &[f64; 3]) -> f64 {
        self.position(t, x)
    }

    #[inline]
    fn log_likelihood(&self, t: usize, x: &[f64; 3], y: &f64) -> f64 {
        gaussian_log_density(*y, self.position(t, x), self.p.sigma_v)
    }

    // The prior keeps omega fixed, so the jitter has no exact importance
    // ratio; it is applied with a zero weight increment.
    #[inline]
    fn propose(&self, _t: usize, x: &[f64; 3], noise: &mut impl Noise) -> ([f64; 3], f64) {
        let w_a = self.p.sigma_a * noise.normal();
        let w_b = self.p.sigma_b * noise.normal();
        let w_omega = self.p.sigma_omega * noise.normal();
        (self.proposal_with_noise(x, w_a, w_b, w_omega), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::noise::{ForcedNoise, Stream};
    use approx::assert_relative_eq;

    fn in_box(m: &TumorModel, x: &[f64; 3]) -> bool {
        let p = m.params();
        (p.a_lo..=p.a_hi).contains(&x[0]) && (p.b_lo..=p.b_hi).contains(&x[1]) && (p.w_lo..=p.w_hi).contains(&x[2])
    }

    #[test]
    fn initial_draws_in_box() {
        let m = TumorModel::default();
        let mut s = Stream::from_seed(1);
        for _ in 0..10_000 {
            assert!(in_box(&m, &m.sample_initial(&mut s)));
        }
    }

    #[test]
    fn zero_noise_transition_is_identity() {
        let m = TumorModel::default();
        let x = [10.0, 0.0, 1.5];
        assert_eq!(m.transition(0, &x, &mut ForcedNoise::zeros()).unwrap(), x);
    }

    #[test]
    fn large_kick_saturates_amplitude() {
        let m = TumorModel::default();
        let next = m.transition(3, &[10.0, 0.0, 1.5], &mut ForcedNoise::normals(vec![100.0, 0.0])).unwrap();
        assert_eq!(next[0], 24.0);
    }

    #[test]
    fn measurement_and_output_by_hand() {
        let m = TumorModel::default();
        assert_eq!(m.measure(0, &[10.0, 2.0, 1.5], &mut ForcedNoise::zeros()).unwrap(), 2.0);
        assert_eq!(m.output(0, &[10.0, 0.0, 1.7]), 0.0);
        // sin(omega * t * delta) = sin(pi) when omega = pi / (t * delta)
        let t = 8;
        let omega = std::f64::consts::PI / (t as f64 * 0.25);
        assert_relative_eq!(m.output(t, &[12.0, 3.3, omega]), 3.3, epsilon = 1e-12);
    }

    #[test]
    fn likelihood_peak() {
        let m = TumorModel::default();
        let x = [12.0, -1.0, 1.6];
        let y = m.output(5, &x);
        assert_relative_eq!(m.log_likelihood(5, &x, &y), -(2.0 * std::f64::consts::PI).sqrt().ln());
        assert!(m.log_likelihood(5, &x, &(y + 0.3)) < m.log_likelihood(5, &x, &y));
    }

    #[test]
    fn proposal_jitters_omega_only_within_bounds() {
        let m = TumorModel::default();
        let (x, inc) = m.importance_transition(0, &[10.0, 1.0, 1.5], &mut ForcedNoise::zeros()).unwrap();
        assert_eq!((x, inc), ([10.0, 1.0, 1.5], 0.0));
        let (x, inc) = m
            .importance_transition(0, &[10.0, 1.0, 2.1], &mut ForcedNoise::normals(vec![0.0, 0.0, 1.0 / 0.005]))
            .unwrap();
        assert_eq!(x[2], 2.1);
        assert_eq!(inc, 0.0);
    }

    #[test]
    fn bounds_preserved_over_many_transitions() {
        let m = TumorModel::default();
        let mut s = Stream::from_seed(9);
        let mut x = m.sample_initial(&mut s);
        for i in 0..100_000 {
            x = m.propagate(i % 30, &x, &mut s);
            assert!(in_box(&m, &x));
        }
    }

    #[test]
    fn time_range_checked() {
        let m = TumorModel::default();
        let x = [10.0, 0.0, 1.5];
        assert!(matches!(m.transition(30, &x, &mut ForcedNoise::zeros()), Err(Error::OutOfHorizon { .. })));
        assert!(m.measure(30, &x, &mut ForcedNoise::zeros()).is_ok());
        assert!(matches!(m.measure(31, &x, &mut ForcedNoise::zeros()), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn rejects_inverted_bounds() {
        let p = TumorParams { a_lo: 30.0, ..TumorParams::default() };
        assert!(TumorModel::new(p).is_err());
    }
}
