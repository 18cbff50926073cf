//! Exact expected revenue of a ranking and the optimal sort.
//!
//! Two independent evaluation routes are provided:
//!
//! * [`expected_revenue`] runs an `O(N^2)` recursion over the distribution of
//!   the number of purchases made before each display position, weighting the
//!   product at position `k` by `q^(k-1) * sum_u s^u * P(u purchases before k)`.
//! * [`brute_force_revenue`] enumerates every attention span, budget and
//!   purchase set and is only meant as a cross-check for small catalogs.

use crate::error::{invalid, Error, Result};
use crate::model::{ConsumerProfile, ProductCatalog, RankingPolicy};

/// Largest catalog accepted by [`brute_force_revenue`].
pub const BRUTE_FORCE_MAX_N: usize = 12;

/// `h(k, u)`: probability of exactly `u` purchases among display positions
/// `1..k-1` when span and budget are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct PurchaseCountTable {
    rows: Vec<Vec<f64>>,
}

impl PurchaseCountTable {
    /// `k` is a one-based display position, `0 <= u <= k - 1`.
    pub fn h(&self, k: usize, u: usize) -> f64 {
        self.rows[k - 1][u]
    }

    /// Row for one-based position `k`; has `k` entries.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k - 1]
    }

    pub fn positions(&self) -> usize {
        self.rows.len()
    }
}

fn check_dims(profile: &ConsumerProfile, policy: &RankingPolicy) -> Result<()> {
    if profile.len() != policy.len() {
        return Err(Error::Dimension {
            expected: policy.len(),
            got: profile.len(),
        });
    }
    Ok(())
}

/// Probability that a consumer with span `v` and budget `b` buys exactly the
/// products at the one-based display positions in `positions`.
pub fn purchase_set_probability(
    positions: &[usize],
    v: usize,
    b: usize,
    profile: &ConsumerProfile,
    policy: &RankingPolicy,
) -> Result<f64> {
    check_dims(profile, policy)?;
    if v == 0 || v > policy.len() {
        return Err(invalid(format!("span {v} outside 1..={}", policy.len())));
    }
    if b == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let mut chosen = vec![false; v];
    for &k in positions {
        if k == 0 || k > v {
            return Err(invalid(format!("position {k} outside 1..={v}")));
        }
        if chosen[k - 1] {
            return Err(invalid(format!("position {k} listed twice")));
        }
        chosen[k - 1] = true;
    }
    let count = positions.len();
    if count > b {
        return Ok(0.0);
    }
    // Budget exhausted at the last purchase: nothing after it is examined.
    let horizon = if count == b {
        positions.iter().copied().max().unwrap_or(0)
    } else {
        v
    };
    let p = (0..horizon)
        .map(|k| {
            let l = profile.lambda(policy.product_at(k));
            if chosen[k] {
                l
            } else {
                1.0 - l
            }
        })
        .product();
    Ok(p)
}

/// Builds `h(k, u)` for `k = 1..=N` by the one-step recursion
/// `h(k, u) = (1 - l) h(k-1, u) + l h(k-1, u-1)` with `l` the purchase
/// probability of the product at position `k - 1`.
pub fn build_purchase_count_table(
    profile: &ConsumerProfile,
    policy: &RankingPolicy,
) -> Result<PurchaseCountTable> {
    check_dims(profile, policy)?;
    let n = policy.len();
    let mut rows = Vec::with_capacity(n);
    let mut row = vec![1.0];
    for k in 0..n {
        if k > 0 {
            let l = profile.lambda(policy.product_at(k - 1));
            row = advance_row(&row, l);
        }
        rows.push(row.clone());
    }
    Ok(PurchaseCountTable { rows })
}

fn advance_row(prev: &[f64], l: f64) -> Vec<f64> {
    let mut next = vec![0.0; prev.len() + 1];
    for (u, &h) in prev.iter().enumerate() {
        next[u] += (1.0 - l) * h;
        next[u + 1] += l * h;
    }
    next
}

/// Expected revenue of `policy` for the given parameters. Panics if the
/// slices disagree in length with the policy.
pub fn revenue_of(
    lambdas: &[f64],
    q: f64,
    s: f64,
    policy: &RankingPolicy,
    revenues: &[f64],
) -> f64 {
    let n = policy.len();
    assert_eq!(lambdas.len(), n);
    assert_eq!(revenues.len(), n);

    // h[u] for the current position; updated in place, highest u first.
    let mut h = vec![0.0; n];
    h[0] = 1.0;
    let mut q_pow = 1.0;
    let mut total = 0.0;
    for k in 0..n {
        let product = policy.product_at(k);
        let l = lambdas[product];

        let mut reach = 0.0;
        let mut s_pow = 1.0;
        for &hu in &h[..=k] {
            reach += s_pow * hu;
            s_pow *= s;
        }
        total += revenues[product] * l * q_pow * reach;

        if k + 1 < n {
            for u in (1..=k + 1).rev() {
                h[u] = (1.0 - l) * h[u] + l * h[u - 1];
            }
            h[0] *= 1.0 - l;
        }
        q_pow *= q;
    }
    total
}

/// Exact expected revenue over geometric span and budget.
pub fn expected_revenue(
    profile: &ConsumerProfile,
    policy: &RankingPolicy,
    catalog: &ProductCatalog,
) -> Result<f64> {
    check_dims(profile, policy)?;
    if catalog.len() != policy.len() {
        return Err(Error::Dimension {
            expected: policy.len(),
            got: catalog.len(),
        });
    }
    Ok(revenue_of(
        profile.lambdas(),
        profile.q(),
        profile.s(),
        policy,
        catalog.revenues(),
    ))
}

/// Direct enumeration over spans, budgets and purchase sets.
///
/// Span mass beyond `N` is folded into `v = N` and budget mass beyond `N`
/// into `b = N`; neither can change the outcome.
pub fn brute_force_revenue(
    profile: &ConsumerProfile,
    policy: &RankingPolicy,
    catalog: &ProductCatalog,
) -> Result<f64> {
    check_dims(profile, policy)?;
    let n = policy.len();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    if catalog.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: catalog.len(),
        });
    }
    let geometric = |p: f64, k: usize| {
        if k < n {
            p.powi(k as i32 - 1) * (1.0 - p)
        } else {
            p.powi(n as i32 - 1)
        }
    };

    let mut total = 0.0;
    let mut positions = Vec::with_capacity(n);
    for v in 1..=n {
        let pv = geometric(profile.q(), v);
        for b in 1..=n {
            let pb = geometric(profile.s(), b);
            for mask in 0u32..(1 << v) {
                positions.clear();
                positions.extend((0..v).filter(|k| mask & (1 << k) != 0).map(|k| k + 1));
                let p = purchase_set_probability(&positions, v, b, profile, policy)?;
                if p == 0.0 {
                    continue;
                }
                let value: f64 = positions
                    .iter()
                    .map(|&k| catalog.revenue(policy.product_at(k - 1)))
                    .sum();
                total += pv * pb * p * value;
            }
        }
    }
    Ok(total)
}

/// Sort key of the optimal ranking: `l r / (1 - q + q (1 - s) l)`.
pub fn ranking_score(lambda: f64, revenue: f64, q: f64, s: f64) -> f64 {
    lambda * revenue / (1.0 - q + q * (1.0 - s) * lambda)
}

/// Orders products by descending `score`, ties by ascending product index.
pub fn rank_by_scores(scores: &[f64]) -> RankingPolicy {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable: equal scores keep index order.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    RankingPolicy::new(order).expect("sorted indices form a permutation")
}

/// Optimal ranking for raw parameters.
pub fn optimal_ranking_for(lambdas: &[f64], q: f64, s: f64, revenues: &[f64]) -> RankingPolicy {
    let scores: Vec<f64> = lambdas
        .iter()
        .zip(revenues)
        .map(|(&l, &r)| ranking_score(l, r, q, s))
        .collect();
    rank_by_scores(&scores)
}

/// Revenue-maximizing ranking: descending [`ranking_score`].
pub fn optimal_ranking(
    profile: &ConsumerProfile,
    catalog: &ProductCatalog,
) -> Result<RankingPolicy> {
    if catalog.len() != profile.len() {
        return Err(Error::Dimension {
            expected: catalog.len(),
            got: profile.len(),
        });
    }
    Ok(optimal_ranking_for(
        profile.lambdas(),
        profile.q(),
        profile.s(),
        catalog.revenues(),
    ))
}
