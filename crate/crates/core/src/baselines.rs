//! Ranking rules of the comparison policies.
//!
//! * Single purchase: the optimal sort with the budget continuation forced to
//!   zero.
//! * Keep viewing: consumers are assumed to always continue after a purchase,
//!   which changes the sort key to `l r / (1 - q - (1 - q) l)`.
//! * Explore then exploit (A and B): show every product `delta ln T` times,
//!   then rank greedily on point estimates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{ProductCatalog, RankingPolicy};
use crate::noncontextual::OptimisticEstimates;
use crate::revenue::{optimal_ranking_for, rank_by_scores, ranking_score};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    SinglePurchase,
    KeepViewing,
    ExploreExploitA,
    ExploreExploitB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Exploration multiplier; only used by the explore-then-exploit kinds.
    pub delta: f64,
    pub horizon: u64,
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind, delta: f64, horizon: u64) -> Result<Self> {
        let needs_delta = matches!(
            kind,
            BaselineKind::ExploreExploitA | BaselineKind::ExploreExploitB
        );
        if needs_delta && !(delta.is_finite() && delta > 0.0) {
            return Err(invalid(format!("delta must be > 0, got {delta}")));
        }
        if horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        Ok(Self {
            kind,
            delta,
            horizon,
        })
    }

    /// Display count a product needs before it counts as explored.
    pub fn exploration_threshold(&self) -> f64 {
        self.delta * (self.horizon as f64).ln()
    }
}

/// Optimal sort with `s = 0`.
pub fn single_purchase_policy(
    est: &OptimisticEstimates,
    catalog: &ProductCatalog,
) -> RankingPolicy {
    optimal_ranking_for(&est.lambda_ucb, est.q_ucb, 0.0, catalog.revenues())
}

/// Keep-viewing sort key, `None` when the denominator is not positive.
pub fn keep_viewing_score(lambda: f64, revenue: f64, q: f64) -> Option<f64> {
    let den = 1.0 - q - (1.0 - q) * lambda;
    (den > 0.0).then(|| lambda * revenue / den)
}

/// Descending keep-viewing score. Products whose denominator is not positive
/// go first, ordered by descending `l r`; ties by ascending index.
pub fn keep_viewing_policy(est: &OptimisticEstimates, catalog: &ProductCatalog) -> RankingPolicy {
    let n = catalog.len();
    let scored: Vec<(Option<f64>, f64)> = (0..n)
        .map(|k| {
            let (l, r) = (est.lambda_ucb[k], catalog.revenue(k));
            (keep_viewing_score(l, r, est.q_ucb), l * r)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (sa, va) = scored[a];
        let (sb, vb) = scored[b];
        match (sa, sb) {
            (None, None) => vb.total_cmp(&va),
            (None, Some(_)) => std::cmp::Ordering::Less,
            (Some(_), None) => std::cmp::Ordering::Greater,
            (Some(x), Some(y)) => y.total_cmp(&x),
        }
    });
    RankingPolicy::new(order).expect("permutation")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExploreVariant {
    A,
    B,
}

/// Explore-then-exploit ranking given per-product display counts and greedy
/// estimates.
///
/// While some product is under-explored, variant A ranks everything by
/// ascending display count; variant B puts the under-explored products first
/// (ascending count) and orders the explored ones by the optimal sort key.
/// Once every product is explored both rank by the optimal sort key.
pub fn explore_then_exploit_policy(
    views: &[u64],
    greedy: &OptimisticEstimates,
    catalog: &ProductCatalog,
    config: &BaselineConfig,
    variant: ExploreVariant,
) -> RankingPolicy {
    let threshold = config.exploration_threshold();
    let explored = |k: usize| views[k] as f64 >= threshold;
    let n = catalog.len();
    if (0..n).all(explored) {
        return optimal_ranking_for(
            &greedy.lambda_ucb,
            greedy.q_ucb,
            greedy.s(),
            catalog.revenues(),
        );
    }
    let by_count = |set: &mut Vec<usize>| set.sort_by_key(|&k| views[k]);
    match variant {
        ExploreVariant::A => {
            let mut order: Vec<usize> = (0..n).collect();
            by_count(&mut order);
            RankingPolicy::new(order).expect("permutation")
        }
        ExploreVariant::B => {
            let (mut fresh, done): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| !explored(k));
            by_count(&mut fresh);
            if done.is_empty() {
                return RankingPolicy::new(fresh).expect("permutation");
            }
            let s = greedy.s();
            let scores: Vec<f64> = done
                .iter()
                .map(|&k| ranking_score(greedy.lambda_ucb[k], catalog.revenue(k), greedy.q_ucb, s))
                .collect();
            let tail = rank_by_scores(&scores);
            fresh.extend(tail.order().iter().map(|&i| done[i]));
            RankingPolicy::new(fresh).expect("permutation")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(l: &[f64], q: f64, w: f64) -> OptimisticEstimates {
        OptimisticEstimates {
            lambda_ucb: l.to_vec(),
            q_ucb: q,
            w_ucb: w,
        }
    }

    #[test]
    fn single_purchase_two_products() {
        let catalog = ProductCatalog::new(vec![1.0, 1.0]).unwrap();
        let e = est(&[0.3, 0.1], 0.9, 0.45);
        // 0.3 / (0.1 + 0.27) = 0.811 > 0.1 / (0.1 + 0.09) = 0.526
        assert_eq!(
            single_purchase_policy(&e, &catalog).order_one_based(),
            vec![1, 2]
        );
    }

    #[test]
    fn keep_viewing_values() {
        assert_eq!(keep_viewing_score(0.0, 1.0, 0.9), Some(0.0));
        let v = keep_viewing_score(0.5, 1.0, 0.9).unwrap();
        assert!((v - 0.5 / 0.05).abs() < 1e-9);
        assert!((keep_viewing_score(0.9, 1.0, 0.9).unwrap() - 0.9 / 0.01).abs() < 1e-6);
        assert_eq!(keep_viewing_score(1.0, 1.0, 0.9), None);
    }

    #[test]
    fn keep_viewing_infinite_scores_first() {
        let catalog = ProductCatalog::new(vec![0.2, 0.9, 0.5, 0.4]).unwrap();
        let e = est(&[0.5, 0.2, 1.0, 1.0], 0.9, 0.0);
        // products 3 and 4 have zero denominators; 3 has the larger l*r.
        // 2: 0.18 / 0.08 = 2.25 beats 1: 0.1 / 0.05 = 2.
        assert_eq!(
            keep_viewing_policy(&e, &catalog).order_one_based(),
            vec![3, 4, 2, 1]
        );
    }

    #[test]
    fn fresh_state_ascending_index() {
        let catalog = ProductCatalog::new(vec![0.2, 0.9, 0.5]).unwrap();
        let cfg = BaselineConfig::new(BaselineKind::ExploreExploitA, 1.0, 1000).unwrap();
        let e = est(&[1.0; 3], 0.95, 0.95);
        for v in [ExploreVariant::A, ExploreVariant::B] {
            let p = explore_then_exploit_policy(&[0, 0, 0], &e, &catalog, &cfg, v);
            assert_eq!(p, RankingPolicy::identity(3));
        }
    }

    #[test]
    fn exploitation_matches_greedy_sort() {
        let catalog = ProductCatalog::new(vec![0.2, 0.9, 0.5]).unwrap();
        let cfg = BaselineConfig::new(BaselineKind::ExploreExploitB, 0.5, 1000).unwrap();
        let e = est(&[0.3, 0.05, 0.2], 0.9, 0.4);
        let want = optimal_ranking_for(&e.lambda_ucb, e.q_ucb, e.s(), catalog.revenues());
        for v in [ExploreVariant::A, ExploreVariant::B] {
            assert_eq!(
                explore_then_exploit_policy(&[10, 10, 10], &e, &catalog, &cfg, v),
                want
            );
        }
    }

    #[test]
    fn variant_b_puts_unexplored_first() {
        let catalog = ProductCatalog::new(vec![0.9, 0.1, 0.5, 0.8]).unwrap();
        let cfg = BaselineConfig::new(BaselineKind::ExploreExploitB, 1.0, 100).unwrap();
        // threshold ln 100 ~ 4.6
        let views = [10, 3, 1, 20];
        let e = est(&[0.3, 0.3, 0.3, 0.3], 0.9, 0.45);
        let b = explore_then_exploit_policy(&views, &e, &catalog, &cfg, ExploreVariant::B);
        assert_eq!(b.order_one_based(), vec![3, 2, 1, 4]);
        let a = explore_then_exploit_policy(&views, &e, &catalog, &cfg, ExploreVariant::A);
        assert_eq!(a.order_one_based(), vec![3, 2, 1, 4]);
        let views = [20, 3, 1, 10];
        let b = explore_then_exploit_policy(&views, &e, &catalog, &cfg, ExploreVariant::B);
        assert_eq!(b.order_one_based(), vec![3, 2, 1, 4]);
        let a = explore_then_exploit_policy(&views, &e, &catalog, &cfg, ExploreVariant::A);
        assert_eq!(a.order_one_based(), vec![3, 2, 4, 1]);
    }

    #[test]
    fn delta_grid_accepted() {
        for d in [0.5, 1.0, 2.0, 5.0, 10.0] {
            assert!(BaselineConfig::new(BaselineKind::ExploreExploitA, d, 50_000).is_ok());
        }
        assert!(BaselineConfig::new(BaselineKind::ExploreExploitA, 0.0, 50_000).is_err());
        assert!(BaselineConfig::new(BaselineKind::KeepViewing, 0.0, 50_000).is_ok());
    }
}
