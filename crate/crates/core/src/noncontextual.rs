//! Counting statistics, point and optimistic estimators, and the UCB learner
//! for a population that shares one set of parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{ConsumerProfile, GlobalConfig, ProductCatalog, RankingPolicy, SessionOutcome};
use crate::revenue::optimal_ranking_for;
use crate::sim::simulate_session;

/// Sufficient statistics gathered from observed sessions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonContextualStats {
    /// Views per product.
    pub views: Vec<u64>,
    /// Purchases per product.
    pub buys: Vec<u64>,
    /// Skips with an observed continuation indicator.
    pub skip_events: u64,
    pub skip_continues: u64,
    /// Purchases with an observed continuation indicator.
    pub buy_events: u64,
    pub buy_continues: u64,
}

impl NonContextualStats {
    pub fn new(n_products: usize) -> Self {
        Self {
            views: vec![0; n_products],
            buys: vec![0; n_products],
            skip_events: 0,
            skip_continues: 0,
            buy_events: 0,
            buy_continues: 0,
        }
    }

    pub fn n_products(&self) -> usize {
        self.views.len()
    }

    /// Folds one session shown under `policy` into the counts.
    pub fn update(&mut self, outcome: &SessionOutcome, policy: &RankingPolicy) {
        for k in 0..outcome.viewed() {
            let product = policy.product_at(k);
            self.views[product] += 1;
            let bought = outcome.purchased(k);
            if bought {
                self.buys[product] += 1;
            }
            if let Some(go_on) = outcome.continuation(k) {
                if bought {
                    self.buy_events += 1;
                    self.buy_continues += u64::from(go_on);
                } else {
                    self.skip_events += 1;
                    self.skip_continues += u64::from(go_on);
                }
            }
        }
    }

    pub fn total_views(&self) -> u64 {
        self.views.iter().sum()
    }
}

/// Functional form of [`NonContextualStats::update`].
pub fn update_stats(
    stats: &NonContextualStats,
    outcome: &SessionOutcome,
    policy: &RankingPolicy,
) -> NonContextualStats {
    let mut next = stats.clone();
    next.update(outcome, policy);
    next
}

/// Empirical frequencies; `None` where the denominator is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimates {
    pub lambdas: Vec<Option<f64>>,
    pub q: Option<f64>,
    pub w: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn point_estimates(stats: &NonContextualStats) -> PointEstimates {
    PointEstimates {
        lambdas: stats
            .buys
            .iter()
            .zip(&stats.views)
            .map(|(&c, &n)| ratio(c, n))
            .collect(),
        q: ratio(stats.skip_continues, stats.skip_events),
        w: ratio(stats.buy_continues, stats.buy_events),
    }
}

/// Estimates handed to a ranking rule: per-product purchase probabilities,
/// attention continuation `q` and post-purchase continuation `w = q s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimisticEstimates {
    pub lambda_ucb: Vec<f64>,
    pub q_ucb: f64,
    pub w_ucb: f64,
}

impl OptimisticEstimates {
    /// Values used before any data: every parameter at its ceiling.
    pub fn initial(n_products: usize, config: &GlobalConfig) -> Self {
        Self {
            lambda_ucb: vec![1.0; n_products],
            q_ucb: config.q_cap(),
            w_ucb: config.q_cap(),
        }
    }

    /// Budget continuation implied by `w / q`, zero when `q` is zero.
    pub fn s(&self) -> f64 {
        if self.q_ucb > 0.0 {
            (self.w_ucb / self.q_ucb).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Multipliers on the confidence radii `xi * sqrt(log t / n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationWeights {
    pub xi_lambda: f64,
    pub xi_q: f64,
    pub xi_w: f64,
}

impl ExplorationWeights {
    pub fn new(xi_lambda: f64, xi_q: f64, xi_w: f64) -> Result<Self> {
        for (name, v) in [("xi_lambda", xi_lambda), ("xi_q", xi_q), ("xi_w", xi_w)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self {
            xi_lambda,
            xi_q,
            xi_w,
        })
    }

    pub fn uniform(xi: f64) -> Result<Self> {
        Self::new(xi, xi, xi)
    }

    /// No exploration bonus: the estimators collapse to point estimates.
    pub fn greedy() -> Self {
        Self {
            xi_lambda: 0.0,
            xi_q: 0.0,
            xi_w: 0.0,
        }
    }
}

impl Default for ExplorationWeights {
    /// `sqrt(2)` on every radius, i.e. `sqrt(2 log t / n)`.
    fn default() -> Self {
        Self {
            xi_lambda: std::f64::consts::SQRT_2,
            xi_q: std::f64::consts::SQRT_2,
            xi_w: std::f64::consts::SQRT_2,
        }
    }
}

fn radius(xi: f64, log_t: f64, n: u64) -> f64 {
    xi * (log_t / n as f64).sqrt()
}

/// Upper confidence estimates after `t >= 1` rounds. Undefined point
/// estimates fall back to the initial ceilings.
pub fn optimistic_estimates(
    stats: &NonContextualStats,
    t: u64,
    weights: &ExplorationWeights,
    config: &GlobalConfig,
) -> OptimisticEstimates {
    let log_t = (t.max(1) as f64).ln();
    let cap = config.q_cap();
    let lambda_ucb = stats
        .buys
        .iter()
        .zip(&stats.views)
        .map(|(&c, &n)| match n {
            0 => 1.0,
            _ => (c as f64 / n as f64 + radius(weights.xi_lambda, log_t, n)).min(1.0),
        })
        .collect();
    let q_ucb = match stats.skip_events {
        0 => cap,
        n => (stats.skip_continues as f64 / n as f64 + radius(weights.xi_q, log_t, n)).min(cap),
    };
    let w_raw = match stats.buy_events {
        0 => cap,
        n => stats.buy_continues as f64 / n as f64 + radius(weights.xi_w, log_t, n),
    };
    OptimisticEstimates {
        lambda_ucb,
        q_ucb,
        w_ucb: w_raw.min(q_ucb),
    }
}

/// Greedy estimates: point estimates with undefined entries at their ceilings.
pub fn greedy_estimates(stats: &NonContextualStats, config: &GlobalConfig) -> OptimisticEstimates {
    let p = point_estimates(stats);
    let q = p.q.unwrap_or(config.q_cap()).min(config.q_cap());
    OptimisticEstimates {
        lambda_ucb: p.lambdas.iter().map(|l| l.unwrap_or(1.0)).collect(),
        q_ucb: q,
        w_ucb: p.w.unwrap_or(config.q_cap()).min(q),
    }
}

/// Whether every estimator lies within `sqrt(2 log t / n)` of the truth.
/// Estimators without data are unconstrained.
pub fn within_confidence(stats: &NonContextualStats, t: u64, truth: &ConsumerProfile) -> bool {
    let log_t = (t.max(1) as f64).ln();
    let ok = |num: u64, den: u64, target: f64| {
        den == 0 || (num as f64 / den as f64 - target).abs() <= (2.0 * log_t / den as f64).sqrt()
    };
    stats
        .buys
        .iter()
        .zip(&stats.views)
        .zip(truth.lambdas())
        .all(|((&c, &n), &l)| ok(c, n, l))
        && ok(stats.skip_continues, stats.skip_events, truth.q())
        && ok(stats.buy_continues, stats.buy_events, truth.w())
}

/// Run state of the non-contextual UCB learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonContextualState {
    pub stats: NonContextualStats,
    /// Rounds completed so far.
    pub round: u64,
    pub estimates: OptimisticEstimates,
}

impl NonContextualState {
    pub fn new(n_products: usize, config: &GlobalConfig) -> Self {
        Self {
            stats: NonContextualStats::new(n_products),
            round: 0,
            estimates: OptimisticEstimates::initial(n_products, config),
        }
    }

    /// Ranking offered to the next consumer.
    pub fn ranking(&self, catalog: &ProductCatalog) -> RankingPolicy {
        let e = &self.estimates;
        optimal_ranking_for(&e.lambda_ucb, e.q_ucb, e.s(), catalog.revenues())
    }

    /// Records one observed session and refreshes the optimistic estimates.
    pub fn observe(
        &mut self,
        policy: &RankingPolicy,
        outcome: &SessionOutcome,
        weights: &ExplorationWeights,
        config: &GlobalConfig,
    ) {
        self.stats.update(outcome, policy);
        self.round += 1;
        self.estimates = optimistic_estimates(&self.stats, self.round, weights, config);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One round of the learner: rank with the current optimistic estimates,
/// simulate the consumer against `truth`, update.
pub fn mpb_ucb_step<R: Rng + ?Sized>(
    state: &mut NonContextualState,
    catalog: &ProductCatalog,
    config: &GlobalConfig,
    weights: &ExplorationWeights,
    truth: &ConsumerProfile,
    rng: &mut R,
) -> (RankingPolicy, SessionOutcome) {
    let policy = state.ranking(catalog);
    let outcome = simulate_session(truth, &policy, rng);
    state.observe(&policy, &outcome, weights, config);
    (policy, outcome)
}
