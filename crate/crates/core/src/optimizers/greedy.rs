use super::{admissible, argmin, check_domain, CostFunction, Evaluator, OptimizationResult};
use crate::error::Result;

/// Starts from the empty set and adds, `N` times, the admissible time whose
/// addition gives the lowest cost.
///
/// With `M` admissible times this takes exactly `N*M - N*(N-1)/2`
/// evaluations, except that when `M = N` the only admissible schedule is
/// returned without evaluations.
pub fn greedy_forward(cost: &impl CostFunction) -> Result<OptimizationResult> {
    check_domain(cost)?;
    let slots = admissible(cost);
    if slots.len() == cost.count() {
        return Ok(OptimizationResult::forced(slots));
    }
    let mut ev = Evaluator::new(cost);
    let mut current: Vec<usize> = Vec::with_capacity(cost.count());
    let mut current_cost = None;
    for _ in 0..cost.count() {
        let candidates: Vec<Vec<usize>> = slots
            .iter()
            .filter(|s| !current.contains(s))
            .map(|&s| {
                let mut c = current.clone();
                c.push(s);
                c.sort_unstable();
                c
            })
            .collect();
        let costs = ev.batch(&candidates)?;
        let i = argmin(&costs);
        current = candidates[i].clone();
        current_cost = Some(costs[i]);
    }
    match current_cost {
        Some(c) => {
            ev.record(c, None);
            Ok(ev.finish(current, c))
        }
        None => Ok(OptimizationResult::forced(current)),
    }
}

/// Starts from every admissible time and removes, one at a time, the time
/// whose removal gives the lowest cost until `N` remain.
///
/// With `M` admissible times this takes exactly `(M*(M+1) - N*(N+1))/2`
/// evaluations.
pub fn greedy_backward(cost: &impl CostFunction) -> Result<OptimizationResult> {
    check_domain(cost)?;
    let mut current = admissible(cost);
    let mut ev = Evaluator::new(cost);
    let mut current_cost = None;
    while current.len() > cost.count() {
        let candidates: Vec<Vec<usize>> = (0..current.len())
            .map(|drop| {
                let mut c = current.clone();
                c.remove(drop);
                c
            })
            .collect();
        let costs = ev.batch(&candidates)?;
        let i = argmin(&costs);
        current = candidates[i].clone();
        current_cost = Some(costs[i]);
    }
    match current_cost {
        Some(c) => {
            ev.record(c, None);
            Ok(ev.finish(current, c))
        }
        None => Ok(OptimizationResult::forced(current)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::FnCost;
    use super::*;

    fn weights(t: usize) -> f64 {
        // distinct per-time costs, minimized at 7, 2, 9, 4, ...
        [5.0, 8.0, 1.0, 6.0, 3.5, 9.0, 7.0, 0.5, 4.0, 2.0, 10.0][t]
    }

    fn separable(s: &[usize]) -> f64 {
        s.iter().map(|&t| weights(t)).sum()
    }

    fn smallest(n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..=10).collect();
        idx.sort_by(|&a, &b| weights(a).partial_cmp(&weights(b)).unwrap());
        let mut out = idx[..n].to_vec();
        out.sort_unstable();
        out
    }

    #[test]
    fn forward_single_time_is_exhaustive() {
        let cost = FnCost::new(10, 1, separable);
        let r = greedy_forward(&cost).unwrap();
        assert_eq!(r.times, vec![7]);
        assert_eq!(r.evaluations, 11);
    }

    #[test]
    fn forward_separable_picks_smallest() {
        for n in 1..=6 {
            let cost = FnCost::new(10, n, separable);
            let r = greedy_forward(&cost).unwrap();
            assert_eq!(r.times, smallest(n));
            assert_eq!(r.evaluations, n * 11 - n * (n - 1) / 2);
            assert_eq!(cost.calls(), r.evaluations);
        }
    }

    #[test]
    fn forward_indicator_cost() {
        let cost = FnCost::new(4, 2, |s: &[usize]| if s.contains(&2) { 0.0 } else { 1.0 });
        let r = greedy_forward(&cost).unwrap();
        assert!(r.times.contains(&2));
        assert_eq!(r.cost, Some(0.0));
        // first round: {2} is the unique zero-cost singleton
        assert_eq!(r.times.len(), 2);
    }

    #[test]
    fn forward_full_is_noop() {
        let cost = FnCost::new(5, 6, separable);
        let r = greedy_forward(&cost).unwrap();
        assert_eq!(r.times, (0..=5).collect::<Vec<_>>());
        assert_eq!(r.evaluations, 0);
    }

    #[test]
    fn backward_full_is_noop() {
        let cost = FnCost::new(5, 6, separable);
        let r = greedy_backward(&cost).unwrap();
        assert_eq!(r.times, (0..=5).collect::<Vec<_>>());
        assert_eq!(r.evaluations, 0);
    }

    #[test]
    fn backward_single_removal_is_exhaustive() {
        let cost = FnCost::new(10, 10, separable);
        let r = greedy_backward(&cost).unwrap();
        // drops the most expensive time
        assert!(!r.times.contains(&10));
        assert_eq!(r.evaluations, 11);
    }

    #[test]
    fn backward_separable_removes_worst() {
        for n in 1..=10 {
            let cost = FnCost::new(10, n, separable);
            let r = greedy_backward(&cost).unwrap();
            assert_eq!(r.times, smallest(n));
            assert_eq!(r.evaluations, (11 * 12 - n * (n + 1)) / 2);
        }
    }

    #[test]
    fn respects_min_time() {
        let mut cost = FnCost::new(10, 2, separable);
        cost.min_time = 8;
        assert_eq!(greedy_forward(&cost).unwrap().times, vec![8, 9]);
        assert_eq!(greedy_backward(&cost).unwrap().times, vec![8, 9]);
    }
}
