//! Intermittent sampling-importance-resampling particle filter.
//!
//! The filter alternates a prediction step (every `t >= 1`) with a
//! correction step that runs only at scheduled measurement times. Each
//! correction is followed by systematic resampling. Weights live in the log
//! domain.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{check_within_horizon, SystemModel, Vector};
use crate::noise::{Noise, Purpose, StreamKey};

/// Strictly increasing measurement times within `0..=horizon`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    times: Vec<usize>,
    horizon: usize,
}

impl Schedule {
    pub fn new(times: Vec<usize>, horizon: usize) -> Result<Self> {
        if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "schedule times must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if let Some(&last) = times.last() {
            if last > horizon {
                return Err(Error::invalid(format!("schedule time {last} exceeds the horizon {horizon}")));
            }
        }
        Ok(Schedule { times, horizon })
    }

    /// Sorts and validates an arbitrary list of times.
    pub fn from_unsorted(mut times: Vec<usize>, horizon: usize) -> Result<Self> {
        times.sort_unstable();
        Self::new(times, horizon)
    }

    /// Every time step `0..=horizon`.
    pub fn full(horizon: usize) -> Self {
        Schedule { times: (0..=horizon).collect(), horizon }
    }

    pub fn empty(horizon: usize) -> Self {
        Schedule { times: Vec::new(), horizon }
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.times.binary_search(&t).is_ok()
    }

    pub fn into_times(self) -> Vec<usize> {
        self.times
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.times.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Weighted particle approximation of the filtering distribution at time `t`.
#[derive(Debug, Clone)]
pub struct ParticleSet<S> {
    t: usize,
    states: Vec<S>,
    log_weights: Vec<f64>,
    // exp(log_weight - max); proportional to the weights
    scaled: Vec<f64>,
    scaled_total: f64,
}

impl<S: Vector> ParticleSet<S> {
    /// Uniformly weighted set.
    pub fn uniform(t: usize, states: Vec<S>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::invalid("particle count must be at least 1"));
        }
        Ok(ParticleSet {
            t,
            log_weights: vec![-(n as f64).ln(); n],
            scaled: vec![1.0; n],
            scaled_total: n as f64,
            states,
        })
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Normalized weights.
    pub fn weights(&self) -> Vec<f64> {
        self.scaled.iter().map(|w| w / self.scaled_total).collect()
    }

    /// Advances every particle through the importance density.
    pub fn predict<M>(&mut self, model: &M, noise: &mut impl Noise) -> Result<()>
    where
        M: SystemModel<State = S>,
    {
        if self.t >= model.horizon() {
            return Err(Error::OutOfHorizon { t: self.t + 1, horizon: model.horizon() });
        }
        let t = self.t;
        let mut reweighted = false;
        for (x, lw) in self.states.iter_mut().zip(self.log_weights.iter_mut()) {
            let (next, inc) = model.propose(t, x, noise);
            *x = next;
            if inc != 0.0 {
                *lw += inc;
                reweighted = true;
            }
        }
        self.t += 1;
        if reweighted {
            self.normalize()?;
        }
        Ok(())
    }

    /// Reweights by the likelihood of `y` and renormalizes. States are untouched.
    pub fn correct<M>(&mut self, model: &M, y: &M::Measurement) -> Result<()>
    where
        M: SystemModel<State = S>,
    {
        let t = self.t;
        for (x, lw) in self.states.iter().zip(self.log_weights.iter_mut()) {
            *lw += model.log_likelihood(t, x, y);
        }
        self.normalize()
    }

    fn normalize(&mut self) -> Result<()> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegenerateWeights { t: self.t });
        }
        let mut total = 0.0;
        for (s, lw) in self.scaled.iter_mut().zip(&self.log_weights) {
            *s = (lw - max).exp();
            total += *s;
        }
        let lse = max + total.ln();
        for lw in &mut self.log_weights {
            *lw -= lse;
        }
        self.scaled_total = total;
        Ok(())
    }

    /// Systematic resampling with the offset drawn from `noise`. Returns the
    /// ancestor index of each new particle.
    pub fn resample_systematic(&mut self, noise: &mut impl Noise) -> Vec<usize> {
        let u = noise.uniform();
        self.resample_with_offset(u)
    }

    pub fn resample_with_offset(&mut self, u: f64) -> Vec<usize> {
        let n = self.states.len();
        let ancestors = systematic_indices(&self.scaled, self.scaled_total, n, u);
        self.states = ancestors.iter().map(|&i| self.states[i]).collect();
        self.log_weights.fill(-(n as f64).ln());
        self.scaled.fill(1.0);
        self.scaled_total = n as f64;
        ancestors
    }

    /// Weighted mean of `h_t` over the particles.
    pub fn estimate<M>(&self, model: &M) -> M::Output
    where
        M: SystemModel<State = S>,
    {
        let mut acc = M::Output::zero();
        for (x, w) in self.states.iter().zip(&self.scaled) {
            if *w > 0.0 {
                acc.add_scaled(&model.output(self.t, x), *w);
            }
        }
        let mut out = M::Output::zero();
        out.add_scaled(&acc, 1.0 / self.scaled_total);
        out
    }
}

/// `ln sum exp(v)`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Equally spaced pointers `(u + i) * total / count`, `i = 0..count`, over
/// the cumulative sum of non-negative `weights`. Returns the index hit by
/// each pointer.
pub fn systematic_indices(weights: &[f64], total: f64, count: usize, u: f64) -> Vec<usize> {
    let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let step = total / count as f64;
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    let mut cum = weights[0];
    for i in 0..count {
        let pos = (u + i as f64) * step;
        while cum <= pos && j < last_positive {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

/// `P` independent draws from the initial distribution, uniformly weighted.
pub fn init_particles<M: SystemModel>(
    model: &M,
    count: usize,
    noise: &mut impl Noise,
) -> Result<ParticleSet<M::State>> {
    if count == 0 {
        return Err(Error::invalid("particle count must be at least 1"));
    }
    let states = (0..count).map(|_| model.sample_initial(noise)).collect();
    ParticleSet::uniform(0, states)
}

/// Particle filter stepping through `0..=T`, correcting only when handed a
/// measurement.
///
/// Random streams are derived from `key` by purpose and time step, so the
/// noise used at step `t` does not depend on which earlier steps corrected.
#[derive(Debug, Clone)]
pub struct IntermittentFilter<'m, M: SystemModel> {
    model: &'m M,
    key: StreamKey,
    particles: ParticleSet<M::State>,
}

impl<'m, M: SystemModel> IntermittentFilter<'m, M> {
    pub fn new(model: &'m M, count: usize, key: StreamKey) -> Result<Self> {
        let particles = init_particles(model, count, &mut key.purpose(Purpose::Initial).stream())?;
        Ok(IntermittentFilter { model, key, particles })
    }

    /// Continues from an existing particle set under a new stream key.
    pub fn resume(model: &'m M, particles: ParticleSet<M::State>, key: StreamKey) -> Self {
        IntermittentFilter { model, key, particles }
    }

    pub fn time(&self) -> usize {
        self.particles.t
    }

    pub fn particles(&self) -> &ParticleSet<M::State> {
        &self.particles
    }

    pub fn into_particles(self) -> ParticleSet<M::State> {
        self.particles
    }

    pub fn predict(&mut self) -> Result<()> {
        let t = self.particles.t + 1;
        let mut noise = self.key.purpose(Purpose::Proposal).child(t as u64).stream();
        self.particles.predict(self.model, &mut noise)
    }

    /// Correction followed by resampling. Returns the ancestor indices.
    pub fn assimilate(&mut self, y: &M::Measurement) -> Result<Vec<usize>> {
        let t = self.particles.t;
        self.particles.correct(self.model, y)?;
        let mut noise = self.key.purpose(Purpose::Resample).child(t as u64).stream();
        Ok(self.particles.resample_systematic(&mut noise))
    }

    pub fn estimate(&self) -> M::Output {
        self.particles.estimate(self.model)
    }
}

/// Filtered estimates `ẑ(0..=T)` for the given schedule and measurements.
///
/// `measurements` must list exactly the schedule times, in order.
pub fn run_filter<M: SystemModel>(
    model: &M,
    schedule: &Schedule,
    measurements: &[(usize, M::Measurement)],
    count: usize,
    key: StreamKey,
) -> Result<Vec<M::Output>> {
    check_measurements(model, schedule, measurements)?;
    let mut filter = IntermittentFilter::new(model, count, key)?;
    let mut pending = measurements.iter().peekable();
    let mut out = Vec::with_capacity(model.horizon() + 1);
    for t in 0..=model.horizon() {
        if t > 0 {
            filter.predict()?;
        }
        if let Some((_, y)) = pending.next_if(|(tm, _)| *tm == t) {
            filter.assimilate(y)?;
        }
        out.push(filter.estimate());
    }
    Ok(out)
}

fn check_measurements<M: SystemModel>(
    model: &M,
    schedule: &Schedule,
    measurements: &[(usize, M::Measurement)],
) -> Result<()> {
    if let Some(&last) = schedule.times().last() {
        check_within_horizon(last, model.horizon())?;
    }
    for (t, _) in measurements {
        if !schedule.contains(*t) {
            return Err(Error::invalid(format!("measurement at t={t} is not in the schedule")));
        }
    }
    let times: Vec<usize> = measurements.iter().map(|(t, _)| *t).collect();
    if times != schedule.times() {
        return Err(Error::invalid(format!(
            "measurements at {times:?} do not cover the schedule {:?}",
            schedule.times()
        )));
    }
    Ok(())
}

/// Writes `t,z,zhat,measured` rows for a scalar-output trajectory.
pub fn write_estimates_csv(
    mut w: impl Write,
    truth: &[f64],
    estimates: &[f64],
    schedule: &Schedule,
) -> std::io::Result<()> {
    writeln!(w, "t,z,zhat,measured")?;
    for (t, (z, zh)) in truth.iter().zip(estimates).enumerate() {
        writeln!(w, "{t},{},{},{}", crate::fmt_float(*z), crate::fmt_float(*zh), u8::from(schedule.contains(t)))?;
    }
    Ok(())
}
