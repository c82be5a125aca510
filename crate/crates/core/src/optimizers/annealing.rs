use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{admissible, argmin, check_domain, mean, mutate, random_subset, CostFunction, Evaluator, OptimizationResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SAConfig {
    pub population_size: usize,
    pub generations: usize,
    pub initial_temperature: f64,
    /// Geometric temperature factor applied after each generation.
    pub decay: f64,
    /// Per-time mutation probability.
    pub mutation_prob: f64,
}

impl Default for SAConfig {
    fn default() -> Self {
        SAConfig { population_size: 50, generations: 25, initial_temperature: 10.0, decay: 0.9, mutation_prob: 0.1 }
    }
}

impl SAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.generations == 0 {
            return Err(Error::invalid("annealing needs a positive population size and generation count"));
        }
        if !(self.initial_temperature >= 0.0 && self.initial_temperature.is_finite()) {
            return Err(Error::invalid("annealing temperature must be finite and non-negative"));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::invalid(format!("decay must lie in (0, 1), got {}", self.decay)));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::invalid(format!("mutation probability {} outside [0, 1]", self.mutation_prob)));
        }
        Ok(())
    }
}

/// Metropolis acceptance probability of a cost change at a temperature.
pub fn acceptance_probability(increase: f64, temperature: f64) -> f64 {
    if increase <= 0.0 {
        1.0
    } else if temperature <= 0.0 {
        0.0
    } else {
        (-increase / temperature).exp()
    }
}

/// Runs `population_size` independent annealing chains for `generations`
/// generations (the random start counts as the first) and returns the best
/// chain state of the last generation.
///
/// Each mutant replaces every time with probability `mutation_prob`; a
/// mutant identical to its parent gets one time replaced.
pub fn simulated_annealing(
    cost: &impl CostFunction,
    cfg: &SAConfig,
    rng: &mut impl Rng,
) -> Result<OptimizationResult> {
    check_domain(cost)?;
    cfg.validate()?;
    let slots = admissible(cost);
    if slots.len() == cost.count() {
        return Ok(OptimizationResult::forced(slots));
    }
    let mut ev = Evaluator::new(cost);
    let mut chains: Vec<Vec<usize>> =
        (0..cfg.population_size).map(|_| random_subset(&slots, cost.count(), rng)).collect();
    let mut costs = ev.batch(&chains)?;
    ev.record(costs[argmin(&costs)], Some(mean(&costs)));
    let mut temperature = cfg.initial_temperature;
    for _ in 1..cfg.generations {
        let mutants: Vec<Vec<usize>> =
            chains.iter().map(|c| mutate(c, &slots, cfg.mutation_prob, true, rng)).collect();
        let mutant_costs = ev.batch(&mutants)?;
        for (i, mutant) in mutants.into_iter().enumerate() {
            let p = acceptance_probability(mutant_costs[i] - costs[i], temperature);
            if p >= 1.0 || rng.random::<f64>() < p {
                chains[i] = mutant;
                costs[i] = mutant_costs[i];
            }
        }
        temperature *= cfg.decay;
        ev.record(costs[argmin(&costs)], Some(mean(&costs)));
    }
    let best = argmin(&costs);
    Ok(ev.finish(chains[best].clone(), costs[best]))
}

#[cfg(test)]
mod tests {
    use super::super::testing::{is_valid, FnCost};
    use super::*;
    use crate::noise::Stream;
    use approx::assert_relative_eq;

    #[test]
    fn metropolis_values() {
        assert_eq!(acceptance_probability(0.0, 10.0), 1.0);
        assert_eq!(acceptance_probability(-3.0, 10.0), 1.0);
        assert_relative_eq!(acceptance_probability(10.0, 10.0), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(acceptance_probability(10.0, 10.0), 0.36787944117144233, max_relative = 1e-12);
    }

    #[test]
    fn cold_limit_rejects_increases() {
        let mut temp = 10.0;
        for _ in 0..2000 {
            temp *= 0.9;
        }
        assert_eq!(acceptance_probability(1e-6, temp), 0.0);
        assert_eq!(acceptance_probability(1.0, 0.0), 0.0);
    }

    #[test]
    fn evaluation_count_is_population_times_generations() {
        let cost = FnCost::new(10, 3, |s: &[usize]| s.iter().sum::<usize>() as f64);
        let cfg = SAConfig { population_size: 6, generations: 7, ..SAConfig::default() };
        let r = simulated_annealing(&cost, &cfg, &mut Stream::from_seed(3)).unwrap();
        assert_eq!(r.evaluations, 42);
        assert_eq!(cost.calls(), 42);
        assert_eq!(r.trace.len(), 7);
        assert!(is_valid(&r.times, &cost));
    }

    #[test]
    fn finds_earliest_times() {
        let cost = FnCost::new(10, 2, |s: &[usize]| s.iter().sum::<usize>() as f64);
        let cfg = SAConfig { population_size: 20, generations: 40, ..SAConfig::default() };
        let r = simulated_annealing(&cost, &cfg, &mut Stream::from_seed(11)).unwrap();
        assert_eq!(r.times, vec![0, 1]);
        assert_eq!(r.cost, Some(1.0));
    }

    #[test]
    fn rejects_bad_decay() {
        let cost = FnCost::new(10, 2, |_: &[usize]| 0.0);
        let cfg = SAConfig { decay: 1.0, ..SAConfig::default() };
        assert!(simulated_annealing(&cost, &cfg, &mut Stream::from_seed(1)).is_err());
    }
}
