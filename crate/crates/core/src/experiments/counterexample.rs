use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{online_schedule, optimize_offline, simulate_run, ExperimentConfig};
use crate::error::{Error, Result};
use crate::filter::Schedule;
use crate::model::CounterexampleModel;
use crate::noise::{Purpose, StreamKey};
use crate::objective::ObjectiveEstimate;
use crate::optimizers::{ExhaustiveConfig, OptimizationResult, OptimizerChoice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSettings {
    /// Simulations per cost estimate, also the draws of each objective
    /// evaluation.
    pub draws: usize,
    /// Particles inside objective evaluations.
    pub particles: usize,
    /// Particles of the filters whose errors are reported.
    pub filter_particles: usize,
    pub model: CounterexampleModel,
}

impl Default for CounterexampleSettings {
    fn default() -> Self {
        CounterexampleSettings { draws: 5000, particles: 200, filter_particles: 1000, model: CounterexampleModel::default() }
    }
}

/// Empirical costs of the adaptive policy (`v0`), the online schedule
/// (`f0`) and the offline schedule (`j0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyCostEstimate {
    pub v0: ObjectiveEstimate,
    pub f0: ObjectiveEstimate,
    pub j0: ObjectiveEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    OrderingHolds,
    OrderingViolated,
    /// Standard errors are not finite, e.g. with a single draw.
    Inconclusive,
}

impl Verdict {
    pub fn describe(self) -> &'static str {
        match self {
            Verdict::OrderingHolds => "ordering holds",
            Verdict::OrderingViolated => "ordering violated",
            Verdict::Inconclusive => "standard errors too large for a verdict",
        }
    }
}

impl PolicyCostEstimate {
    /// Checks `v0 <= f0 <= j0`, allowing each step `sigmas` combined
    /// standard errors of slack.
    pub fn verdict(&self, sigmas: f64) -> Verdict {
        let pairs = [(self.v0, self.f0), (self.f0, self.j0)];
        if pairs.iter().any(|(a, b)| !combined(a, b).is_finite()) {
            return Verdict::Inconclusive;
        }
        if pairs.iter().all(|(a, b)| a.value <= b.value + sigmas * combined(a, b)) {
            Verdict::OrderingHolds
        } else {
            Verdict::OrderingViolated
        }
    }
}

fn combined(a: &ObjectiveEstimate, b: &ObjectiveEstimate) -> f64 {
    (a.std_error * a.std_error + b.std_error * b.std_error).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub offline: OptimizationResult,
    /// Realized online schedules with their counts.
    pub online_schedules: Vec<(Vec<usize>, usize)>,
    pub costs: PolicyCostEstimate,
    pub verdict: Verdict,
}

struct SimCosts {
    adaptive: f64,
    online: f64,
    offline: f64,
    online_times: Vec<usize>,
}

/// Measures at 0, then at 1 if `y(0)` is positive and at 2 otherwise.
fn adaptive_schedule(y0: f64) -> Vec<usize> {
    if y0 > 0.0 {
        vec![0, 1]
    } else {
        vec![0, 2]
    }
}

/// Runs the two-measurement example where adapting to the first
/// measurement beats both the offline and the online schedule.
pub fn counterexample_check(settings: &CounterexampleSettings, root: StreamKey) -> Result<CounterexampleReport> {
    if settings.draws == 0 || settings.particles == 0 || settings.filter_particles == 0 {
        return Err(Error::invalid("draws and particle counts must be at least 1"));
    }
    let model = settings.model;
    model.validate()?;
    let cfg = ExperimentConfig {
        measurements: 2,
        draws: settings.draws,
        particles: settings.particles,
        filter_particles: settings.filter_particles,
        simulations: settings.draws,
    };
    let optimizer = OptimizerChoice::Exhaustive(ExhaustiveConfig::default());
    let offline = optimize_offline(&model, &optimizer, &cfg, root)?;
    let offline_schedule = Schedule::new(offline.times.clone(), 2)?;

    let per_sim: Vec<SimCosts> = (0..settings.draws)
        .into_par_iter()
        .map(|i| {
            let key = root.purpose(Purpose::Simulation).child(i as u64);
            let run = simulate_run(&model, key);
            let filter_key = key.purpose(Purpose::Filter);
            let p = settings.filter_particles;
            let adaptive = Schedule::new(adaptive_schedule(run.measurements[0]), 2)?;
            let (online, _) = online_schedule(&model, &optimizer, &cfg, root, &run, &offline)?;
            Ok(SimCosts {
                adaptive: run.cumulative_error(&model, &adaptive, p, filter_key)?,
                online: run.cumulative_error(&model, &online, p, filter_key)?,
                offline: run.cumulative_error(&model, &offline_schedule, p, filter_key)?,
                online_times: online.into_times(),
            })
        })
        .collect::<Result<_>>()?;

    let column = |f: fn(&SimCosts) -> f64| ObjectiveEstimate::from_samples(&per_sim.iter().map(f).collect::<Vec<_>>());
    let costs =
        PolicyCostEstimate { v0: column(|r| r.adaptive), f0: column(|r| r.online), j0: column(|r| r.offline) };
    let mut counts = BTreeMap::new();
    for r in &per_sim {
        *counts.entry(r.online_times.clone()).or_insert(0) += 1;
    }
    let online_schedules = counts.into_iter().collect();
    Ok(CounterexampleReport { offline, online_schedules, verdict: costs.verdict(3.0), costs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(value: f64, std_error: f64) -> ObjectiveEstimate {
        ObjectiveEstimate { value, std_error, draws: 10 }
    }

    #[test]
    fn verdicts() {
        let ok = PolicyCostEstimate { v0: est(0.0, 0.1), f0: est(1.0, 0.1), j0: est(1.0, 0.1) };
        assert_eq!(ok.verdict(3.0), Verdict::OrderingHolds);
        let slack = PolicyCostEstimate { v0: est(0.0, 0.1), f0: est(1.2, 0.1), j0: est(1.0, 0.1) };
        assert_eq!(slack.verdict(3.0), Verdict::OrderingHolds);
        let bad = PolicyCostEstimate { v0: est(0.0, 0.01), f0: est(2.0, 0.01), j0: est(1.0, 0.01) };
        assert_eq!(bad.verdict(3.0), Verdict::OrderingViolated);
        let one = PolicyCostEstimate { v0: est(0.0, f64::INFINITY), ..ok };
        assert_eq!(one.verdict(3.0), Verdict::Inconclusive);
    }

    #[test]
    fn adaptive_rule() {
        assert_eq!(adaptive_schedule(1.0), vec![0, 1]);
        assert_eq!(adaptive_schedule(-0.99), vec![0, 2]);
    }

    #[test]
    fn small_run_finds_the_example_schedule() {
        let s = CounterexampleSettings { draws: 400, particles: 100, filter_particles: 300, ..Default::default() };
        let r = counterexample_check(&s, StreamKey::new(1)).unwrap();
        assert_eq!(r.offline.times, vec![1, 2]);
        assert_eq!(r.online_schedules, vec![(vec![1, 2], 400)]);
        assert!(r.costs.v0.value < 0.05 * r.costs.j0.value);
    }

    #[test]
    fn single_draw_is_inconclusive() {
        let s = CounterexampleSettings { draws: 1, ..Default::default() };
        assert_eq!(counterexample_check(&s, StreamKey::new(2)).unwrap().verdict, Verdict::Inconclusive);
    }
}
