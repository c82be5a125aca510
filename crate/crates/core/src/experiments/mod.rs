//! Offline and online scheduling pipelines and their evaluation against
//! the regularly spaced baseline.

mod counterexample;
mod kalman;
pub mod report;

pub use counterexample::{counterexample_check, CounterexampleReport, CounterexampleSettings, PolicyCostEstimate, Verdict};
pub use kalman::{kalman_oracle, kalman_oracle_matrix, riccati_variances};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{run_filter, Schedule};
use crate::model::{SystemModel, Vector};
use crate::noise::{Purpose, StreamKey};
use crate::objective::{estimate_cost, simulate_trajectory, AcquiredPrefix, CostSettings, ObjectiveEstimate};
use crate::optimizers::{CostFunction, OptimizationResult, OptimizerChoice};

/// `N` times spread evenly over `0..=T`: `round(k T / (N - 1))` for
/// `k = 0..N`, rounding half away from zero. A single time is placed at 0.
pub fn regular_schedule(horizon: usize, count: usize) -> Result<Schedule> {
    if count == 0 || count > horizon + 1 {
        return Err(Error::invalid(format!("cannot spread {count} times over 0..={horizon}")));
    }
    if count == 1 {
        return Schedule::new(vec![0], horizon);
    }
    let times: Vec<usize> =
        (0..count).map(|k| ((k * horizon) as f64 / (count - 1) as f64).round() as usize).collect();
    if times.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("rounding {count} evenly spaced times over 0..={horizon} collides")));
    }
    Schedule::new(times, horizon)
}

/// `log10(mse_reg / mse)`.
pub fn gain(mse_reg: f64, mse: f64) -> Result<f64> {
    if !(mse_reg > 0.0 && mse > 0.0) {
        return Err(Error::invalid(format!("gain needs positive errors, got {mse_reg} and {mse}")));
    }
    Ok((mse_reg / mse).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainReport {
    pub mse: f64,
    pub mse_reg: f64,
    /// `None` when either error is zero.
    pub gain: Option<f64>,
}

impl GainReport {
    pub fn new(mse: f64, mse_reg: f64) -> Self {
        GainReport { mse, mse_reg, gain: gain(mse_reg, mse).ok() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndicatorSummary {
    pub count: usize,
    pub mean_gain: f64,
    /// Sample standard deviation; 0 for a single gain.
    pub std_gain: f64,
    pub median_gain: f64,
    pub proportion_positive: f64,
}

pub fn indicators(gains: &[f64]) -> Result<IndicatorSummary> {
    if gains.is_empty() {
        return Err(Error::invalid("no gains to summarize"));
    }
    let n = gains.len();
    let mean = gains.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (gains.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = gains.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let positive = gains.iter().filter(|&&g| g > 0.0).count();
    Ok(IndicatorSummary {
        count: n,
        mean_gain: mean,
        std_gain: std,
        median_gain: median,
        proportion_positive: positive as f64 / n as f64,
    })
}

/// Counts shared by both pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Measurement budget `N`.
    pub measurements: usize,
    /// Monte-Carlo draws `K` per objective evaluation.
    pub draws: usize,
    /// Particles inside objective evaluations.
    pub particles: usize,
    /// Particles of the filters whose errors are reported.
    pub filter_particles: usize,
    pub simulations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { measurements: 11, draws: 1000, particles: 200, filter_particles: 1000, simulations: 2000 }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        for (name, v) in [
            ("measurements", self.measurements),
            ("draws", self.draws),
            ("particles", self.particles),
            ("filter_particles", self.filter_particles),
            ("simulations", self.simulations),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.measurements > horizon + 1 {
            return Err(Error::invalid(format!(
                "{} measurements do not fit in 0..={horizon}",
                self.measurements
            )));
        }
        Ok(())
    }

    fn cost_settings(&self) -> CostSettings {
        CostSettings { draws: self.draws, particles: self.particles }
    }
}

/// The objective of one scheduling program: choose `count` more times
/// after the acquired prefix.
pub struct ObjectiveCost<'a, M: SystemModel> {
    pub model: &'a M,
    pub prefix: &'a AcquiredPrefix<M::Measurement>,
    pub count: usize,
    pub settings: CostSettings,
    pub key: StreamKey,
}

impl<M: SystemModel> CostFunction for ObjectiveCost<'_, M> {
    fn horizon(&self) -> usize {
        self.model.horizon()
    }

    fn count(&self) -> usize {
        self.count
    }

    fn min_time(&self) -> usize {
        self.prefix.last_time().map_or(0, |t| t + 1)
    }

    fn evaluate(&self, times: &[usize], evaluation: u64) -> Result<ObjectiveEstimate> {
        let key = self.key.purpose(Purpose::Evaluation).child(evaluation);
        estimate_cost(self.model, self.prefix, times, self.settings, key)
    }
}

/// Key of the program that follows `prefix`. It depends only on the root
/// seed and the acquired measurements, so replaying a prefix replays the
/// decision, and the first program is shared by every simulation.
pub fn program_key<Y: Vector>(root: StreamKey, prefix: &AcquiredPrefix<Y>) -> StreamKey {
    let mut key = root.purpose(Purpose::Program);
    for (t, y) in prefix.pairs() {
        key = key.child(*t as u64);
        for v in y.as_slice() {
            key = key.child(v.to_bits());
        }
    }
    key
}

/// Solves the program following `prefix` for `count` more times.
pub fn solve_program<M: SystemModel>(
    model: &M,
    optimizer: &OptimizerChoice,
    cfg: &ExperimentConfig,
    prefix: &AcquiredPrefix<M::Measurement>,
    count: usize,
    root: StreamKey,
) -> Result<OptimizationResult> {
    let key = program_key(root, prefix);
    let cost = ObjectiveCost { model, prefix, count, settings: cfg.cost_settings(), key };
    optimizer.run(&cost, &mut key.purpose(Purpose::Optimizer).stream())
}

/// Solves the offline program: all `N` times chosen before any measurement.
pub fn optimize_offline<M: SystemModel>(
    model: &M,
    optimizer: &OptimizerChoice,
    cfg: &ExperimentConfig,
    root: StreamKey,
) -> Result<OptimizationResult> {
    cfg.validate(model.horizon())?;
    solve_program(model, optimizer, cfg, &AcquiredPrefix::empty(), cfg.measurements, root)
}

/// A hidden trajectory with a measurement drawn at every time.
///
/// Measurement noise at `t` comes from its own stream, so filters with
/// different schedules see identical values at shared times.
pub struct SimulatedRun<M: SystemModel> {
    pub states: Vec<M::State>,
    pub measurements: Vec<M::Measurement>,
}

pub fn simulate_run<M: SystemModel>(model: &M, key: StreamKey) -> SimulatedRun<M> {
    let states = simulate_trajectory(model, &mut key.purpose(Purpose::Trajectory).stream());
    let measurements = states
        .iter()
        .enumerate()
        .map(|(t, x)| model.observe(t, x, &mut key.purpose(Purpose::Measurement).child(t as u64).stream()))
        .collect();
    SimulatedRun { states, measurements }
}

impl<M: SystemModel> SimulatedRun<M> {
    /// Cumulative squared output error over `0..=T` of a filter measuring
    /// at `schedule`.
    pub fn cumulative_error(&self, model: &M, schedule: &Schedule, particles: usize, key: StreamKey) -> Result<f64> {
        let ys: Vec<(usize, M::Measurement)> = schedule.times().iter().map(|&t| (t, self.measurements[t])).collect();
        let estimates = run_filter(model, schedule, &ys, particles, key)?;
        Ok(self
            .states
            .iter()
            .zip(&estimates)
            .enumerate()
            .map(|(t, (x, zh))| model.output(t, x).squared_distance(zh))
            .sum())
    }

    /// Time-averaged squared output error.
    pub fn mse(&self, model: &M, schedule: &Schedule, particles: usize, key: StreamKey) -> Result<f64> {
        Ok(self.cumulative_error(model, schedule, particles, key)? / self.states.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub sim_id: usize,
    pub seed: u64,
    pub schedule: Vec<usize>,
    pub report: GainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchOutcome {
    pub records: Vec<SimulationRecord>,
    /// Indicators over the simulations with a defined gain.
    pub summary: Option<IndicatorSummary>,
    /// Simulations where an error was exactly zero.
    pub degenerate: usize,
}

impl BatchOutcome {
    fn from_records(records: Vec<SimulationRecord>) -> Self {
        let gains: Vec<f64> = records.iter().filter_map(|r| r.report.gain).collect();
        let degenerate = records.len() - gains.len();
        BatchOutcome { summary: indicators(&gains).ok(), degenerate, records }
    }
}

fn simulation_key(root: StreamKey, sim: usize) -> StreamKey {
    root.purpose(Purpose::Simulation).child(sim as u64)
}

fn with_index<T>(index: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Simulation { index, source: Box::new(e) })
}

/// Runs `cfg.simulations` simulations. `choose` returns the schedule of
/// each one; both filters then share the trajectory, the measurement noise
/// and the filter streams.
fn run_batch<M, F>(model: &M, cfg: &ExperimentConfig, root: StreamKey, choose: F) -> Result<BatchOutcome>
where
    M: SystemModel,
    F: Fn(&SimulatedRun<M>) -> Result<Schedule> + Sync,
{
    let regular = regular_schedule(model.horizon(), cfg.measurements)?;
    let records = (0..cfg.simulations)
        .into_par_iter()
        .map(|i| {
            let key = simulation_key(root, i);
            let run = simulate_run(model, key);
            with_index(i, (|| {
                let schedule = choose(&run)?;
                let filter_key = key.purpose(Purpose::Filter);
                let mse = run.mse(model, &schedule, cfg.filter_particles, filter_key)?;
                let mse_reg = run.mse(model, &regular, cfg.filter_particles, filter_key)?;
                Ok(SimulationRecord {
                    sim_id: i,
                    seed: key.value(),
                    schedule: schedule.into_times(),
                    report: GainReport::new(mse, mse_reg),
                })
            })())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchOutcome::from_records(records))
}

/// Compares a fixed schedule with the regular one over fresh simulations.
pub fn evaluate_schedule<M: SystemModel>(
    model: &M,
    schedule: &Schedule,
    cfg: &ExperimentConfig,
    root: StreamKey,
) -> Result<BatchOutcome> {
    cfg.validate(model.horizon())?;
    if schedule.len() != cfg.measurements || schedule.horizon() != model.horizon() {
        return Err(Error::invalid(format!(
            "schedule {schedule} does not hold {} times within 0..={}",
            cfg.measurements,
            model.horizon()
        )));
    }
    run_batch(model, cfg, root, |_| Ok(schedule.clone()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineOutcome {
    pub optimization: OptimizationResult,
    pub schedule: Schedule,
    pub batch: BatchOutcome,
}

/// Optimizes one schedule before any measurement, then measures its gain
/// over the regular schedule on fresh simulations.
pub fn run_offline_pipeline<M: SystemModel>(
    model: &M,
    optimizer: &OptimizerChoice,
    cfg: &ExperimentConfig,
    root: StreamKey,
) -> Result<OfflineOutcome> {
    let optimization = optimize_offline(model, optimizer, cfg, root)?;
    let schedule = Schedule::new(optimization.times.clone(), model.horizon())?;
    let batch = evaluate_schedule(model, &schedule, cfg, root)?;
    Ok(OfflineOutcome { optimization, schedule, batch })
}

/// Realizes an online schedule on one simulated run: before each
/// acquisition the remaining times are re-optimized given everything
/// measured so far, and only the first of them is acquired.
///
/// `first` is the solution of the first program, which does not depend on
/// the run. Returns the schedule and the number of evaluations spent after
/// the first program.
pub fn online_schedule<M: SystemModel>(
    model: &M,
    optimizer: &OptimizerChoice,
    cfg: &ExperimentConfig,
    root: StreamKey,
    run: &SimulatedRun<M>,
    first: &OptimizationResult,
) -> Result<(Schedule, usize)> {
    let mut prefix = AcquiredPrefix::empty();
    let mut evaluations = 0;
    let mut next = first.times[0];
    for j in 0..cfg.measurements {
        if j > 0 {
            let solution = solve_program(model, optimizer, cfg, &prefix, cfg.measurements - j, root)?;
            evaluations += solution.evaluations;
            next = solution.times[0];
        }
        prefix.push(next, run.measurements[next])?;
    }
    Ok((Schedule::new(prefix.times(), model.horizon())?, evaluations))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOutcome {
    pub first_program: OptimizationResult,
    pub batch: BatchOutcome,
    /// Cost evaluations over all programs and simulations.
    pub evaluations: usize,
}

pub fn run_online_pipeline<M: SystemModel>(
    model: &M,
    optimizer: &OptimizerChoice,
    cfg: &ExperimentConfig,
    root: StreamKey,
) -> Result<OnlineOutcome> {
    let first = optimize_offline(model, optimizer, cfg, root)?;
    let spent = std::sync::atomic::AtomicUsize::new(0);
    let batch = run_batch(model, cfg, root, |run| {
        let (schedule, evaluations) = online_schedule(model, optimizer, cfg, root, run, &first)?;
        spent.fetch_add(evaluations, std::sync::atomic::Ordering::Relaxed);
        Ok(schedule)
    })?;
    let evaluations = first.evaluations + spent.into_inner();
    Ok(OnlineOutcome { first_program: first, batch, evaluations })
}
