use serde::{Deserialize, Serialize};

use super::{admissible, argmin, check_domain, CostFunction, Evaluator, OptimizationResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExhaustiveConfig {
    /// Evaluations averaged per schedule.
    pub repeats: usize,
    /// Largest number of schedules we agree to enumerate.
    pub cap: u128,
}

impl Default for ExhaustiveConfig {
    fn default() -> Self {
        ExhaustiveConfig { repeats: 1, cap: 10_000 }
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Next combination in lexicographic order, in place.
fn advance(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Evaluates every admissible schedule, averaging `repeats` evaluations of
/// each, and returns the cheapest (lexicographically first on ties). A
/// single admissible schedule is returned without evaluating it.
pub fn exhaustive_search(cost: &impl CostFunction, cfg: &ExhaustiveConfig) -> Result<OptimizationResult> {
    check_domain(cost)?;
    if cfg.repeats == 0 {
        return Err(Error::invalid("exhaustive repeats must be at least 1"));
    }
    let slots = admissible(cost);
    let n = cost.count();
    if slots.len() == n {
        return Ok(OptimizationResult::forced(slots));
    }
    let total = binomial(slots.len(), n);
    if total > cfg.cap {
        return Err(Error::SearchTooLarge { count: total, cap: cfg.cap });
    }
    let mut schedules = Vec::with_capacity(total as usize);
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        schedules.push(idx.iter().map(|&i| slots[i]).collect::<Vec<_>>());
        if !advance(&mut idx, slots.len()) {
            break;
        }
    }
    let mut ev = Evaluator::new(cost);
    let batch: Vec<Vec<usize>> =
        schedules.iter().flat_map(|s| std::iter::repeat_n(s.clone(), cfg.repeats)).collect();
    let raw = ev.batch(&batch)?;
    let averages: Vec<f64> = raw.chunks(cfg.repeats).map(|c| c.iter().sum::<f64>() / cfg.repeats as f64).collect();
    let best = argmin(&averages);
    ev.record(averages[best], None);
    Ok(ev.finish(schedules[best].clone(), averages[best]))
}
