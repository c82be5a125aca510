//! Monte-Carlo estimate of the expected cumulative filtering error.
//!
//! For a candidate set of future measurement times, draw `K` hidden
//! trajectories consistent with the measurements already acquired, simulate
//! the future measurements, run the intermittent particle filter on the
//! acquired plus simulated measurements, and average
//! `sum_{t = t_j}^{T} |z(t) - ẑ(t)|^2` over the draws. `t_j` is the last
//! acquired time, or `0` when nothing has been acquired.
//!
//! Conditioning on acquired measurements goes through a [`PrefixPosterior`]:
//! a particle filter run once over the acquired prefix with full ancestry.
//! Each draw picks one ancestral path from it and simulates forward. The
//! per-draw filters resume from the same posterior cloud, which is the
//! filter the acquired measurements would have produced.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{IntermittentFilter, ParticleSet};
use crate::model::{SystemModel, Vector};
use crate::noise::{Noise, Purpose, StreamKey};

/// Measurements already acquired, as strictly increasing `(t, y)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquiredPrefix<Y> {
    pairs: Vec<(usize, Y)>,
}

impl<Y> Default for AcquiredPrefix<Y> {
    fn default() -> Self {
        AcquiredPrefix { pairs: Vec::new() }
    }
}

impl<Y: Copy> AcquiredPrefix<Y> {
    pub fn new(pairs: Vec<(usize, Y)>) -> Result<Self> {
        if pairs.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("acquired measurement times must be strictly increasing"));
        }
        Ok(AcquiredPrefix { pairs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn pairs(&self) -> &[(usize, Y)] {
        &self.pairs
    }

    pub fn times(&self) -> Vec<usize> {
        self.pairs.iter().map(|(t, _)| *t).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn last_time(&self) -> Option<usize> {
        self.pairs.last().map(|(t, _)| *t)
    }

    /// First time step included in the cost sum.
    pub fn cost_start(&self) -> usize {
        self.last_time().unwrap_or(0)
    }

    pub fn push(&mut self, t: usize, y: Y) -> Result<()> {
        if self.last_time().is_some_and(|last| last >= t) {
            return Err(Error::invalid(format!("acquisition at t={t} is not after the last acquired time")));
        }
        self.pairs.push((t, y));
        Ok(())
    }
}

/// Estimated expected cumulative error with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ObjectiveEstimate {
    pub value: f64,
    /// Infinite when `draws == 1`.
    pub std_error: f64,
    pub draws: usize,
}

impl ObjectiveEstimate {
    /// Mean and standard error of a sample.
    pub fn from_samples(samples: &[f64]) -> Self {
        let k = samples.len();
        let mean = samples.iter().sum::<f64>() / k as f64;
        let std_error = if k > 1 {
            let var = samples.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            f64::INFINITY
        };
        ObjectiveEstimate { value: mean, std_error, draws: k }
    }
}

/// Monte-Carlo settings of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostSettings {
    /// Number of simulated trajectories `K`.
    pub draws: usize,
    /// Particles in each inner filter.
    pub particles: usize,
}

/// Expected cumulative squared filtering error from `t_j` to `T` when the
/// remaining measurements are taken at `future_times`.
pub fn estimate_cost<M: SystemModel>(
    model: &M,
    prefix: &AcquiredPrefix<M::Measurement>,
    future_times: &[usize],
    settings: CostSettings,
    key: StreamKey,
) -> Result<ObjectiveEstimate> {
    if settings.draws == 0 || settings.particles == 0 {
        return Err(Error::invalid("draws and particles must be at least 1"));
    }
    check_combined(model, prefix, future_times)?;

    let samples: Vec<f64> = if prefix.is_empty() {
        (0..settings.draws)
            .into_par_iter()
            .map(|k| unconditional_draw_cost(model, future_times, settings.particles, draw_key(key, k)))
            .collect::<Result<_>>()?
    } else {
        let posterior = PrefixPosterior::build(model, prefix, settings.particles, key.purpose(Purpose::Filter))?;
        let start_estimate = posterior.estimate(model);
        (0..settings.draws)
            .into_par_iter()
            .map(|k| conditional_draw_cost(model, &posterior, &start_estimate, future_times, draw_key(key, k)))
            .collect::<Result<_>>()?
    };
    Ok(ObjectiveEstimate::from_samples(&samples))
}

fn draw_key(key: StreamKey, k: usize) -> StreamKey {
    key.purpose(Purpose::Draw).child(k as u64)
}

fn check_combined<M: SystemModel>(
    model: &M,
    prefix: &AcquiredPrefix<M::Measurement>,
    future_times: &[usize],
) -> Result<()> {
    let mut all = prefix.times();
    all.extend_from_slice(future_times);
    if all.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "acquired times {:?} followed by future times {future_times:?} are not strictly increasing",
            prefix.times()
        )));
    }
    if let Some(&last) = all.last() {
        if last > model.horizon() {
            return Err(Error::invalid(format!("time {last} exceeds the horizon {}", model.horizon())));
        }
    }
    Ok(())
}

fn unconditional_draw_cost<M: SystemModel>(
    model: &M,
    future_times: &[usize],
    particles: usize,
    key: StreamKey,
) -> Result<f64> {
    let mut traj = key.purpose(Purpose::Trajectory).stream();
    let mut x = model.sample_initial(&mut traj);
    let mut filter = IntermittentFilter::new(model, particles, key.purpose(Purpose::Filter))?;
    let mut next = future_times.iter().peekable();
    let mut total = 0.0;
    for t in 0..=model.horizon() {
        if t > 0 {
            x = model.propagate(t - 1, &x, &mut traj);
            filter.predict()?;
        }
        if next.next_if(|&&tm| tm == t).is_some() {
            let y = model.observe(t, &x, &mut measurement_noise(key, t));
            filter.assimilate(&y)?;
        }
        total += model.output(t, &x).squared_distance(&filter.estimate());
    }
    Ok(total)
}

fn conditional_draw_cost<M: SystemModel>(
    model: &M,
    posterior: &PrefixPosterior<M::State>,
    start_estimate: &M::Output,
    future_times: &[usize],
    key: StreamKey,
) -> Result<f64> {
    let start = posterior.time();
    let mut x = posterior.sample_terminal(&mut key.purpose(Purpose::Ancestry).stream());
    let mut total = model.output(start, &x).squared_distance(start_estimate);
    if start == model.horizon() {
        return Ok(total);
    }
    let mut traj = key.purpose(Purpose::Trajectory).stream();
    let mut filter = IntermittentFilter::resume(model, posterior.particles.clone(), key.purpose(Purpose::Filter));
    let mut next = future_times.iter().peekable();
    for t in start + 1..=model.horizon() {
        x = model.propagate(t - 1, &x, &mut traj);
        filter.predict()?;
        if next.next_if(|&&tm| tm == t).is_some() {
            let y = model.observe(t, &x, &mut measurement_noise(key, t));
            filter.assimilate(&y)?;
        }
        total += model.output(t, &x).squared_distance(&filter.estimate());
    }
    Ok(total)
}

fn measurement_noise(key: StreamKey, t: usize) -> crate::noise::Stream {
    key.purpose(Purpose::Measurement).child(t as u64).stream()
}

/// Particle approximation of the state path given the acquired prefix,
/// with ancestry kept so whole paths can be sampled.
#[derive(Debug, Clone)]
pub struct PrefixPosterior<S> {
    // states[t] are the particles after prediction at t, before resampling
    states: Vec<Vec<S>>,
    // ancestors[t] is set when t was a measurement time
    ancestors: Vec<Option<Vec<usize>>>,
    particles: ParticleSet<S>,
}

impl<S: Vector> PrefixPosterior<S> {
    /// Runs the filter from `0` up to the last acquired time. The prefix
    /// must not be empty.
    pub fn build<M>(model: &M, prefix: &AcquiredPrefix<M::Measurement>, count: usize, key: StreamKey) -> Result<Self>
    where
        M: SystemModel<State = S>,
    {
        let end = prefix
            .last_time()
            .ok_or_else(|| Error::invalid("posterior requires at least one acquired measurement"))?;
        if end > model.horizon() {
            return Err(Error::OutOfHorizon { t: end, horizon: model.horizon() });
        }
        let mut filter = IntermittentFilter::new(model, count, key)?;
        let mut states = Vec::with_capacity(end + 1);
        let mut ancestors = Vec::with_capacity(end + 1);
        let mut pending = prefix.pairs().iter().peekable();
        for t in 0..=end {
            if t > 0 {
                filter.predict()?;
            }
            states.push(filter.particles().states().to_vec());
            match pending.next_if(|(tm, _)| *tm == t) {
                Some((_, y)) => ancestors.push(Some(filter.assimilate(y)?)),
                None => ancestors.push(None),
            }
        }
        Ok(PrefixPosterior { states, ancestors, particles: filter.into_particles() })
    }

    /// Last acquired time.
    pub fn time(&self) -> usize {
        self.particles.time()
    }

    pub fn particles(&self) -> &ParticleSet<S> {
        &self.particles
    }

    pub fn estimate<M>(&self, model: &M) -> M::Output
    where
        M: SystemModel<State = S>,
    {
        self.particles.estimate(model)
    }

    fn pick(&self, noise: &mut impl Noise) -> usize {
        // uniform weights after the resampling at the last acquired time
        let n = self.particles.len();
        ((noise.uniform() * n as f64) as usize).min(n - 1)
    }

    /// A posterior draw of `x(t_j)`.
    pub fn sample_terminal(&self, noise: &mut impl Noise) -> S {
        self.particles.states()[self.pick(noise)]
    }

    /// A posterior draw of the path `x(0..=t_j)`.
    pub fn sample_path(&self, noise: &mut impl Noise) -> Vec<S> {
        let mut idx = self.pick(noise);
        let mut path = Vec::with_capacity(self.states.len());
        for t in (0..self.states.len()).rev() {
            if let Some(a) = &self.ancestors[t] {
                idx = a[idx];
            }
            path.push(self.states[t][idx]);
        }
        path.reverse();
        path
    }
}

/// Samples a full trajectory `x(0..=T)` from the posterior given the prefix
/// (the prior when the prefix is empty), extended forward by the dynamics.
pub fn conditional_draw<M: SystemModel>(
    model: &M,
    prefix: &AcquiredPrefix<M::Measurement>,
    particles: usize,
    key: StreamKey,
) -> Result<Vec<M::State>> {
    let mut traj = key.purpose(Purpose::Trajectory).stream();
    let mut path = if prefix.is_empty() {
        vec![model.sample_initial(&mut traj)]
    } else {
        let posterior = PrefixPosterior::build(model, prefix, particles, key.purpose(Purpose::Filter))?;
        posterior.sample_path(&mut key.purpose(Purpose::Ancestry).stream())
    };
    while path.len() <= model.horizon() {
        let t = path.len() - 1;
        let next = model.propagate(t, &path[t], &mut traj);
        path.push(next);
    }
    Ok(path)
}

/// Prior trajectory `x(0..=T)`.
pub fn simulate_trajectory<M: SystemModel>(model: &M, noise: &mut impl Noise) -> Vec<M::State> {
    let mut path = Vec::with_capacity(model.horizon() + 1);
    path.push(model.sample_initial(noise));
    for t in 0..model.horizon() {
        let next = model.propagate(t, &path[t], noise);
        path.push(next);
    }
    path
}
