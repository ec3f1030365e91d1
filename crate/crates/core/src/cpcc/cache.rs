use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use crate::measures::{uniform_weights, FlowPlan};
use crate::ot_exact::greedy_unchecked;

/// Memoized greedy plans between uniform measures, keyed by `(m, n)`.
///
/// Safe to share across threads. Concurrent misses on the same key may
/// compute the plan more than once; every writer stores the same plan, so
/// the last write wins without changing the result.
#[derive(Debug, Default)]
pub struct PlanCache {
    plans: RwLock<HashMap<(usize, usize), Arc<FlowPlan>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Greedy plan between `m` and `n` uniform weights. A stored `(n, m)`
    /// plan is returned transposed.
    pub fn lookup(&self, m: usize, n: usize) -> Arc<FlowPlan> {
        assert!(m > 0 && n > 0, "plan sizes must be positive");
        {
            let plans = self.plans.read().expect("plan cache lock poisoned");
            if let Some(p) = plans.get(&(m, n)) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Arc::clone(p);
            }
            if let Some(p) = plans.get(&(n, m)) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Arc::new(p.transpose());
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let plan = Arc::new(greedy_unchecked(&uniform_weights(m), &uniform_weights(n)));
        self.plans
            .write()
            .expect("plan cache lock poisoned")
            .insert((m, n), Arc::clone(&plan));
        plan
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.plans.read().expect("plan cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Free-function form of [`PlanCache::lookup`].
pub fn plan_cache_lookup(cache: &PlanCache, m: usize, n: usize) -> Arc<FlowPlan> {
    cache.lookup(m, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::validate_plan;
    use rayon::prelude::*;

    #[test]
    fn repeated_lookups_hit() {
        let cache = PlanCache::new();
        let p1 = cache.lookup(4, 6);
        let p2 = cache.lookup(4, 6);
        assert_eq!(p1, p2);
        assert_eq!((cache.hits(), cache.misses()), (1, 1));
    }

    #[test]
    fn swapped_sizes_are_transposed() {
        let cache = PlanCache::new();
        let p = cache.lookup(3, 5);
        let q = cache.lookup(5, 3);
        assert_eq!(*q, p.transpose());
        assert_eq!(cache.misses(), 1);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn cached_plans_are_feasible() {
        let cache = PlanCache::new();
        for (m, n) in [(1, 1), (2, 7), (9, 4), (10, 10)] {
            let p = cache.lookup(m, n);
            assert!(validate_plan(&p, &uniform_weights(m), &uniform_weights(n)).valid);
            assert!(p.nnz() < m + n);
        }
    }

    #[test]
    fn concurrent_writers_agree() {
        let cache = PlanCache::new();
        let plans: Vec<_> = (0..64)
            .into_par_iter()
            .map(|k| cache.lookup(5 + k % 3, 7))
            .collect();
        for (k, p) in plans.iter().enumerate() {
            assert_eq!(
                **p,
                greedy_unchecked(&uniform_weights(5 + k % 3), &uniform_weights(7))
            );
        }
        assert_eq!(cache.hits() + cache.misses(), 64);
        assert_eq!(cache.len(), 3);
    }
}
