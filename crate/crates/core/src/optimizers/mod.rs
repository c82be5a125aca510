//! Black-box minimizers over size-`N` subsets of the admissible times
//! `t_min..=T`.
//!
//! Cost evaluations are noisy. Each call is tagged with a running
//! evaluation index so that the cost function can derive fresh random
//! streams per evaluation while staying reproducible.

mod annealing;
mod exhaustive;
mod genetic;
mod greedy;
mod random_trial;

pub use annealing::{acceptance_probability, simulated_annealing, SAConfig};
pub use exhaustive::{binomial, exhaustive_search, ExhaustiveConfig};
pub use genetic::{
    count_preserving_crossover, exchange_times, genetic, sigma_scaling, stochastic_universal_sampling, GAConfig,
};
pub use greedy::{greedy_backward, greedy_forward};
pub use random_trial::random_trial;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ObjectiveEstimate;

/// Noisy objective over measurement-time subsets.
///
/// `evaluate` must accept any strictly increasing subset of
/// `min_time()..=horizon()`, of any size up to the full range; greedy
/// searches evaluate partial and over-full sets.
pub trait CostFunction: Sync {
    fn horizon(&self) -> usize;

    /// Number of times to choose.
    fn count(&self) -> usize;

    /// Earliest admissible time.
    fn min_time(&self) -> usize {
        0
    }

    fn evaluate(&self, times: &[usize], evaluation: u64) -> Result<ObjectiveEstimate>;
}

/// Admissible time slots of a cost function.
pub fn admissible(cost: &impl CostFunction) -> Vec<usize> {
    (cost.min_time()..=cost.horizon()).collect()
}

fn check_domain(cost: &impl CostFunction) -> Result<()> {
    let slots = cost.horizon() + 1;
    if cost.min_time() > cost.horizon() {
        return Err(Error::invalid(format!(
            "earliest admissible time {} exceeds the horizon {}",
            cost.min_time(),
            cost.horizon()
        )));
    }
    if cost.count() > slots - cost.min_time() {
        return Err(Error::invalid(format!(
            "cannot choose {} times among the {} admissible ones",
            cost.count(),
            slots - cost.min_time()
        )));
    }
    Ok(())
}

/// One point of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub evaluations: usize,
    pub best_cost: f64,
    /// Mean cost of the current population, for population methods.
    pub population_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    /// Chosen times, sorted.
    pub times: Vec<usize>,
    /// Estimated cost of `times` as seen by the optimizer; `None` when the
    /// schedule was forced and never evaluated.
    pub cost: Option<f64>,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
}

impl OptimizationResult {
    fn forced(times: Vec<usize>) -> Self {
        OptimizationResult { times, cost: None, evaluations: 0, trace: Vec::new() }
    }
}

/// Numbers evaluations and tracks the best schedule seen so far.
struct Evaluator<'c, C: CostFunction> {
    cost: &'c C,
    evaluations: usize,
    best: Option<(Vec<usize>, f64)>,
    trace: Vec<TracePoint>,
}

impl<'c, C: CostFunction> Evaluator<'c, C> {
    fn new(cost: &'c C) -> Self {
        Evaluator { cost, evaluations: 0, best: None, trace: Vec::new() }
    }

    /// Evaluates a batch, possibly concurrently; results keep batch order.
    fn batch(&mut self, schedules: &[Vec<usize>]) -> Result<Vec<f64>> {
        let base = self.evaluations as u64;
        let costs: Vec<f64> = schedules
            .par_iter()
            .enumerate()
            .map(|(i, s)| self.cost.evaluate(s, base + i as u64).map(|e| e.value))
            .collect::<Result<_>>()?;
        self.evaluations += schedules.len();
        for (s, &c) in schedules.iter().zip(&costs) {
            if self.best.as_ref().is_none_or(|(_, b)| c < *b) {
                self.best = Some((s.clone(), c));
            }
        }
        Ok(costs)
    }

    fn record(&mut self, best_cost: f64, population_mean: Option<f64>) {
        self.trace.push(TracePoint { evaluations: self.evaluations, best_cost, population_mean });
    }

    fn finish(self, times: Vec<usize>, cost: f64) -> OptimizationResult {
        OptimizationResult { times, cost: Some(cost), evaluations: self.evaluations, trace: self.trace }
    }
}

/// Index of the smallest value; the earliest wins ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Uniformly random sorted `count`-subset of `slots`.
pub fn random_subset(slots: &[usize], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, slots.len(), count).iter().map(|i| slots[i]).collect();
    picked.sort_unstable();
    picked
}

/// Replaces each time with probability `prob` by a uniformly chosen
/// admissible time not already in the schedule. With `at_least_one`, a
/// schedule left untouched gets one random time replaced. Returns the
/// sorted result.
pub fn mutate(times: &[usize], slots: &[usize], prob: f64, at_least_one: bool, rng: &mut impl Rng) -> Vec<usize> {
    let mut out = times.to_vec();
    if slots.len() <= out.len() {
        return out;
    }
    let mut changed = false;
    for i in 0..out.len() {
        if rng.random::<f64>() < prob {
            out[i] = fresh_time(&out, slots, rng);
            changed = true;
        }
    }
    if at_least_one && !changed && !out.is_empty() {
        let i = rng.random_range(0..out.len());
        out[i] = fresh_time(&out, slots, rng);
    }
    out.sort_unstable();
    out
}

fn fresh_time(current: &[usize], slots: &[usize], rng: &mut impl Rng) -> usize {
    let free: Vec<usize> = slots.iter().copied().filter(|s| !current.contains(s)).collect();
    free[rng.random_range(0..free.len())]
}

/// Optimizer selection with its settings, as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerChoice {
    Rt {
        budget: usize,
    },
    Gf,
    Gb,
    Sa(SAConfig),
    Ga(GAConfig),
    Exhaustive(ExhaustiveConfig),
}

impl OptimizerChoice {
    pub fn label(&self) -> &'static str {
        match self {
            OptimizerChoice::Rt { .. } => "rt",
            OptimizerChoice::Gf => "gf",
            OptimizerChoice::Gb => "gb",
            OptimizerChoice::Sa(_) => "sa",
            OptimizerChoice::Ga(_) => "ga",
            OptimizerChoice::Exhaustive(_) => "exhaustive",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerChoice::Rt { budget } if *budget == 0 => Err(Error::invalid("rt budget must be at least 1")),
            OptimizerChoice::Sa(c) => c.validate(),
            OptimizerChoice::Ga(c) => c.validate(),
            OptimizerChoice::Exhaustive(c) if c.repeats == 0 => {
                Err(Error::invalid("exhaustive repeats must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Random-trial budget matching the evaluation count of a population
    /// method, for like-for-like comparisons.
    pub fn evaluation_budget(&self) -> Option<usize> {
        match self {
            OptimizerChoice::Rt { budget } => Some(*budget),
            OptimizerChoice::Sa(c) => Some(c.population_size * c.generations),
            OptimizerChoice::Ga(c) => Some(c.population_size * c.generations),
            _ => None,
        }
    }

    pub fn run(&self, cost: &impl CostFunction, rng: &mut impl Rng) -> Result<OptimizationResult> {
        self.validate()?;
        match self {
            OptimizerChoice::Rt { budget } => random_trial(cost, *budget, rng),
            OptimizerChoice::Gf => greedy_forward(cost),
            OptimizerChoice::Gb => greedy_backward(cost),
            OptimizerChoice::Sa(c) => simulated_annealing(cost, c, rng),
            OptimizerChoice::Ga(c) => genetic(cost, c, rng),
            OptimizerChoice::Exhaustive(c) => exhaustive_search(cost, c),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::Stream;
    use proptest::prelude::*;

    #[test]
    fn argmin_prefers_earliest() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), 1);
    }

    #[test]
    fn mutation_without_room_is_identity() {
        let slots: Vec<usize> = (0..4).collect();
        let mut rng = Stream::from_seed(1);
        assert_eq!(mutate(&[0, 1, 2, 3], &slots, 1.0, true, &mut rng), vec![0, 1, 2, 3]);
    }

    #[test]
    fn forced_mutation_changes_schedule() {
        let slots: Vec<usize> = (0..=30).collect();
        let mut rng = Stream::from_seed(2);
        for _ in 0..100 {
            let s = random_subset(&slots, 11, &mut rng);
            assert_ne!(mutate(&s, &slots, 0.0, true, &mut rng), s);
        }
    }

    #[test]
    fn choice_deserializes_from_flat_table() {
        let c: OptimizerChoice = toml::from_str("name = \"ga\"\npopulation_size = 10\ngenerations = 4").unwrap();
        match c {
            OptimizerChoice::Ga(g) => {
                assert_eq!((g.population_size, g.generations), (10, 4));
                assert_eq!(g.mutation_prob, 0.003);
            }
            other => panic!("{other:?}"),
        }
        assert!(toml::from_str::<OptimizerChoice>("name = \"ga\"\npopulation = 10").is_err());
        assert!(toml::from_str::<OptimizerChoice>("name = \"nope\"").is_err());
        let rt: OptimizerChoice = toml::from_str("name = \"rt\"\nbudget = 5").unwrap();
        assert_eq!(rt, OptimizerChoice::Rt { budget: 5 });
    }

    proptest! {
        #[test]
        fn mutation_keeps_schedules_valid(seed in any::<u64>(), count in 1usize..10, prob in 0.0f64..1.0) {
            let slots: Vec<usize> = (2..=15).collect();
            let mut rng = Stream::from_seed(seed);
            let s = random_subset(&slots, count, &mut rng);
            let m = mutate(&s, &slots, prob, true, &mut rng);
            prop_assert_eq!(m.len(), count);
            prop_assert!(m.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(m.iter().all(|t| slots.contains(t)));
        }
    }
}
