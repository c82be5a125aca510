use rand::Rng;

use super::{admissible, check_domain, random_subset, CostFunction, Evaluator, OptimizationResult};
use crate::error::{Error, Result};

/// Samples `budget` schedules uniformly at random and keeps the cheapest.
pub fn random_trial(cost: &impl CostFunction, budget: usize, rng: &mut impl Rng) -> Result<OptimizationResult> {
    check_domain(cost)?;
    if budget == 0 {
        return Err(Error::invalid("random trial budget must be at least 1"));
    }
    let slots = admissible(cost);
    if slots.len() == cost.count() {
        return Ok(OptimizationResult::forced(slots));
    }
    let mut ev = Evaluator::new(cost);
    let schedules: Vec<Vec<usize>> = (0..budget).map(|_| random_subset(&slots, cost.count(), rng)).collect();
    let costs = ev.batch(&schedules)?;
    let mut best = f64::INFINITY;
    for (i, c) in costs.iter().enumerate() {
        best = best.min(*c);
        ev.trace.push(super::TracePoint { evaluations: i + 1, best_cost: best, population_mean: None });
    }
    let (times, c) = ev.best.clone().expect("budget >= 1");
    Ok(ev.finish(times, c))
}
