use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{admissible, argmin, check_domain, mean, mutate, random_subset, CostFunction, Evaluator, OptimizationResult};
use crate::error::{Error, Result};
use crate::filter::systematic_indices;

const FITNESS_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GAConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-time mutation probability.
    pub mutation_prob: f64,
    pub sigma_coefficient: f64,
}

impl Default for GAConfig {
    fn default() -> Self {
        GAConfig { population_size: 50, generations: 25, crossover_prob: 1.0, mutation_prob: 0.003, sigma_coefficient: 1.0 }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.generations == 0 {
            return Err(Error::invalid("genetic search needs a positive population size and generation count"));
        }
        if !self.population_size.is_multiple_of(2) {
            return Err(Error::invalid(format!("population size must be even, got {}", self.population_size)));
        }
        for (name, p) in [("crossover", self.crossover_prob), ("mutation", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} probability {p} outside [0, 1]")));
            }
        }
        if !(self.sigma_coefficient > 0.0 && self.sigma_coefficient.is_finite()) {
            return Err(Error::invalid("sigma coefficient must be positive"));
        }
        Ok(())
    }
}

/// Maps costs to fitness for minimization:
/// `max(0.01, 1 + (mean - cost) / (2 c sigma))`, or 1 everywhere when the
/// costs do not vary.
pub fn sigma_scaling(costs: &[f64], sigma_coefficient: f64) -> Result<Vec<f64>> {
    if costs.is_empty() {
        return Err(Error::invalid("sigma scaling needs at least one cost"));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite cost in population".into()));
    }
    let m = mean(costs);
    let sigma = (costs.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / costs.len() as f64).sqrt();
    if sigma == 0.0 {
        return Ok(vec![1.0; costs.len()]);
    }
    Ok(costs.iter().map(|c| (1.0 + (m - c) / (2.0 * sigma_coefficient * sigma)).max(FITNESS_FLOOR)).collect())
}

/// Selects `count` indices with equally spaced pointers over the fitness
/// wheel, using a single uniform offset.
pub fn stochastic_universal_sampling(fitness: &[f64], count: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::invalid("selection count must be at least 1"));
    }
    if fitness.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::invalid("fitness values must be finite and non-negative"));
    }
    let total: f64 = fitness.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("fitness values sum to zero"));
    }
    Ok(systematic_indices(fitness, total, count, rng.random::<f64>()))
}

/// Moves `give1` from the first parent to the second and `give2` the other
/// way. Both lists must have equal length and hold times owned only by the
/// giving parent.
pub fn exchange_times(parent1: &[usize], parent2: &[usize], give1: &[usize], give2: &[usize]) -> (Vec<usize>, Vec<usize>) {
    debug_assert_eq!(give1.len(), give2.len());
    let mut c1: Vec<usize> = parent1.iter().copied().filter(|t| !give1.contains(t)).chain(give2.iter().copied()).collect();
    let mut c2: Vec<usize> = parent2.iter().copied().filter(|t| !give2.contains(t)).chain(give1.iter().copied()).collect();
    c1.sort_unstable();
    c2.sort_unstable();
    (c1, c2)
}

/// Swaps equally sized random subsets of the times each parent holds and
/// the other lacks. The exchange size is uniform on `0..=|D|`.
pub fn count_preserving_crossover(
    parent1: &[usize],
    parent2: &[usize],
    rng: &mut impl Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if parent1.len() != parent2.len() {
        return Err(Error::invalid(format!(
            "parents hold {} and {} times",
            parent1.len(),
            parent2.len()
        )));
    }
    let d1: Vec<usize> = parent1.iter().copied().filter(|t| !parent2.contains(t)).collect();
    let d2: Vec<usize> = parent2.iter().copied().filter(|t| !parent1.contains(t)).collect();
    let s = rng.random_range(0..=d1.len().min(d2.len()));
    let give1: Vec<usize> = rand::seq::index::sample(rng, d1.len(), s).iter().map(|i| d1[i]).collect();
    let give2: Vec<usize> = rand::seq::index::sample(rng, d2.len(), s).iter().map(|i| d2[i]).collect();
    Ok(exchange_times(parent1, parent2, &give1, &give2))
}

/// Generational GA: evaluate, sigma-scale, select by SUS, pair up and cross
/// over, mutate. Returns the best individual of the last generation.
pub fn genetic(cost: &impl CostFunction, cfg: &GAConfig, rng: &mut impl Rng) -> Result<OptimizationResult> {
    check_domain(cost)?;
    cfg.validate()?;
    let slots = admissible(cost);
    if slots.len() == cost.count() {
        return Ok(OptimizationResult::forced(slots));
    }
    let population = (0..cfg.population_size).map(|_| random_subset(&slots, cost.count(), rng)).collect();
    evolve(cost, cfg, population, rng)
}

pub(crate) fn evolve(
    cost: &impl CostFunction,
    cfg: &GAConfig,
    mut population: Vec<Vec<usize>>,
    rng: &mut impl Rng,
) -> Result<OptimizationResult> {
    let slots = admissible(cost);
    let mut ev = Evaluator::new(cost);
    let mut costs = Vec::new();
    for generation in 0..cfg.generations {
        costs = ev.batch(&population)?;
        ev.record(costs[argmin(&costs)], Some(mean(&costs)));
        if generation + 1 == cfg.generations {
            break;
        }
        let fitness = sigma_scaling(&costs, cfg.sigma_coefficient)?;
        let chosen = stochastic_universal_sampling(&fitness, population.len(), rng)?;
        let mut parents: Vec<Vec<usize>> = chosen.into_iter().map(|i| population[i].clone()).collect();
        parents.shuffle(rng);
        let mut next = Vec::with_capacity(parents.len());
        for pair in parents.chunks(2) {
            let (a, b) = if rng.random::<f64>() < cfg.crossover_prob {
                count_preserving_crossover(&pair[0], &pair[1], rng)?
            } else {
                (pair[0].clone(), pair[1].clone())
            };
            next.push(a);
            next.push(b);
        }
        population = next.into_iter().map(|c| mutate(&c, &slots, cfg.mutation_prob, false, rng)).collect();
    }
    let best = argmin(&costs);
    Ok(ev.finish(population[best].clone(), costs[best]))
}

#[cfg(test)]
mod tests {
    use super::super::testing::{is_valid, FnCost};
    use super::*;
    use crate::noise::Stream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn sigma_scaling_examples() {
        assert_eq!(sigma_scaling(&[4.0, 4.0, 4.0], 1.0).unwrap(), vec![1.0; 3]);
        let f = sigma_scaling(&[0.0, 2.0], 1.0).unwrap();
        assert_relative_eq!(f[0], 1.5);
        assert_relative_eq!(f[1], 0.5);
        // the outlier sits 3 population deviations above the mean
        let mut costs = vec![0.0; 9];
        costs.push(10.0);
        let f = sigma_scaling(&costs, 1.0).unwrap();
        assert_eq!(f[9], 0.01);
        assert!(sigma_scaling(&[], 1.0).is_err());
    }

    #[test]
    fn sus_examples() {
        for seed in 0..50 {
            let mut rng = Stream::from_seed(seed);
            let mut two = stochastic_universal_sampling(&[1.0, 1.0], 2, &mut rng).unwrap();
            two.sort_unstable();
            assert_eq!(two, vec![0, 1]);
            let picks = stochastic_universal_sampling(&[3.0, 1.0], 4, &mut rng).unwrap();
            assert_eq!(picks.iter().filter(|&&i| i == 0).count(), 3);
            assert_eq!(stochastic_universal_sampling(&[1.0, 0.0], 3, &mut rng).unwrap(), vec![0, 0, 0]);
        }
        let mut rng = Stream::from_seed(0);
        assert!(stochastic_universal_sampling(&[0.0, 0.0], 3, &mut rng).is_err());
        assert!(stochastic_universal_sampling(&[1.0, -1.0], 3, &mut rng).is_err());
        assert!(stochastic_universal_sampling(&[1.0], 0, &mut rng).is_err());
    }

    #[test]
    fn crossover_examples() {
        let mut rng = Stream::from_seed(4);
        let (a, b) = count_preserving_crossover(&[1, 5, 9], &[1, 5, 9], &mut rng).unwrap();
        assert_eq!((a, b), (vec![1, 5, 9], vec![1, 5, 9]));
        assert_eq!(exchange_times(&[1, 2, 3], &[2, 3, 4], &[1], &[4]), (vec![2, 3, 4], vec![1, 2, 3]));
        assert!(count_preserving_crossover(&[1, 2], &[1], &mut rng).is_err());
    }

    #[test]
    fn single_generation_of_clones() {
        let cost = FnCost::new(10, 3, |s: &[usize]| s.iter().sum::<usize>() as f64);
        let cfg = GAConfig { population_size: 4, generations: 1, ..GAConfig::default() };
        let r = evolve(&cost, &cfg, vec![vec![2, 5, 7]; 4], &mut Stream::from_seed(1)).unwrap();
        assert_eq!(r.times, vec![2, 5, 7]);
        assert_eq!(r.evaluations, 4);
    }

    #[test]
    fn clones_persist_without_mutation() {
        let cost = FnCost::new(10, 3, |s: &[usize]| s.iter().sum::<usize>() as f64);
        let cfg = GAConfig { population_size: 6, generations: 8, mutation_prob: 0.0, ..GAConfig::default() };
        let r = evolve(&cost, &cfg, vec![vec![3, 4, 8]; 6], &mut Stream::from_seed(2)).unwrap();
        assert_eq!(r.times, vec![3, 4, 8]);
        assert!(r.trace.iter().all(|p| p.best_cost == 15.0 && p.population_mean == Some(15.0)));
        assert_eq!(r.evaluations, 48);
    }

    #[test]
    fn odd_population_rejected() {
        let cost = FnCost::new(10, 2, |_: &[usize]| 0.0);
        let cfg = GAConfig { population_size: 5, ..GAConfig::default() };
        assert!(genetic(&cost, &cfg, &mut Stream::from_seed(1)).is_err());
    }

    fn success_rate(toy: impl Fn(&[usize]) -> f64 + Sync + Copy) -> usize {
        let cfg = GAConfig { population_size: 30, generations: 15, ..GAConfig::default() };
        let mut hits = 0;
        for seed in 0..100 {
            let cost = FnCost::new(10, 2, toy);
            let r = genetic(&cost, &cfg, &mut Stream::from_seed(seed)).unwrap();
            assert!(is_valid(&r.times, &cost));
            assert_eq!(r.evaluations, 450);
            hits += (r.times == vec![3, 8]) as usize;
        }
        hits
    }

    #[test]
    fn toy_optimum_found_reliably() {
        // unique optimum {3, 8} among the 55 pairs of 0..=10
        let missing = |s: &[usize]| 2.0 - s.iter().filter(|t| **t == 3 || **t == 8).count() as f64;
        let hits = success_rate(missing);
        assert!(hits >= 90, "optimum found in {hits}/100 runs");
    }

    #[test]
    fn smooth_toy_regression() {
        // without elitism the GA often settles on a neighbour here; 83/100
        // when frozen
        let quad = |s: &[usize]| (s[0] as f64 - 3.0).powi(2) + (s[1] as f64 - 8.0).powi(2);
        let hits = success_rate(quad);
        assert!(hits >= 75, "optimum found in {hits}/100 runs");
    }

    proptest! {
        #[test]
        fn crossover_keeps_children_valid(seed in any::<u64>(), n in 1usize..12) {
            let slots: Vec<usize> = (0..=30).collect();
            let mut rng = Stream::from_seed(seed);
            let p1 = random_subset(&slots, n, &mut rng);
            let p2 = random_subset(&slots, n, &mut rng);
            let (c1, c2) = count_preserving_crossover(&p1, &p2, &mut rng).unwrap();
            for c in [&c1, &c2] {
                prop_assert_eq!(c.len(), n);
                prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            }
            let mut before: Vec<usize> = p1.iter().chain(&p2).copied().collect();
            let mut after: Vec<usize> = c1.iter().chain(&c2).copied().collect();
            before.sort_unstable();
            after.sort_unstable();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn sus_copies_within_one(seed in any::<u64>(), fitness in prop::collection::vec(0.0f64..5.0, 1..20), count in 1usize..60) {
            let total: f64 = fitness.iter().sum();
            prop_assume!(total > 1e-9);
            let picks = stochastic_universal_sampling(&fitness, count, &mut Stream::from_seed(seed)).unwrap();
            prop_assert_eq!(picks.len(), count);
            for (i, f) in fitness.iter().enumerate() {
                let copies = picks.iter().filter(|&&p| p == i).count() as f64;
                let expected = count as f64 * f / total;
                prop_assert!((copies - expected).abs() < 1.0 + 1e-9, "index {} copies {} expected {}", i, copies, expected);
            }
        }

        #[test]
        fn sigma_fitness_orders_by_cost(costs in prop::collection::vec(-100.0f64..100.0, 1..30)) {
            let f = sigma_scaling(&costs, 1.0).unwrap();
            for i in 0..costs.len() {
                prop_assert!(f[i] >= 0.01);
                for j in 0..costs.len() {
                    if costs[i] < costs[j] {
                        prop_assert!(f[i] >= f[j]);
                    }
                }
            }
        }
    }
}
