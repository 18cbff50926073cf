//! Ranking strategies behind one trait, registered by name.
//!
//! Every strategy owns a [`Learner`] that accumulates what consumers revealed
//! and differs only in how it turns the learner's estimates into a ranking.
//! The harness looks strategies up by the `algorithm` field of its config.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::baselines::{
    explore_then_exploit_policy, keep_viewing_policy, single_purchase_policy, BaselineConfig,
    BaselineKind, ExploreVariant,
};
use crate::contextual::{
    contextual_optimistic_estimates, ContextFeatures, ContextualParams, ContextualState,
};
use crate::error::{invalid, Error, Result};
use crate::model::{GlobalConfig, ProductCatalog, RankingPolicy, SessionOutcome};
use crate::noncontextual::{
    greedy_estimates, optimistic_estimates, ExplorationWeights, NonContextualStats,
    OptimisticEstimates,
};
use crate::revenue::optimal_ranking_for;

/// Feature dimensions and ridge hyperparameters of the contextual setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContextSetup {
    pub m_x: usize,
    pub m_y: usize,
    pub params: ContextualParams,
}

/// Everything a factory needs to build a strategy.
#[derive(Debug, Clone)]
pub struct StrategySetup {
    pub catalog: ProductCatalog,
    pub config: GlobalConfig,
    pub weights: ExplorationWeights,
    pub delta: f64,
    pub horizon: u64,
    /// `Some` selects the contextual learner.
    pub context: Option<ContextSetup>,
}

/// Observation store shared by all strategies.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "setting", rename_all = "snake_case")]
pub enum Learner {
    NonContextual {
        stats: NonContextualStats,
        round: u64,
    },
    Contextual {
        state: Box<ContextualState>,
        params: ContextualParams,
        /// Views per product.
        views: Vec<u64>,
    },
}

fn need_features(features: Option<&ContextFeatures>) -> Result<&ContextFeatures> {
    features.ok_or_else(|| invalid("contextual strategy requires consumer features"))
}

impl Learner {
    pub fn new(n_products: usize, context: Option<&ContextSetup>) -> Result<Self> {
        Ok(match context {
            None => Learner::NonContextual {
                stats: NonContextualStats::new(n_products),
                round: 0,
            },
            Some(c) => Learner::Contextual {
                state: Box::new(ContextualState::new(c.m_x, c.m_y, n_products, &c.params)?),
                params: c.params,
                views: vec![0; n_products],
            },
        })
    }

    pub fn round(&self) -> u64 {
        match self {
            Learner::NonContextual { round, .. } => *round,
            Learner::Contextual { state, .. } => state.round,
        }
    }

    /// Number of times each product has been viewed.
    pub fn views(&self) -> &[u64] {
        match self {
            Learner::NonContextual { stats, .. } => &stats.views,
            Learner::Contextual { views, .. } => views,
        }
    }

    pub fn observe(
        &mut self,
        features: Option<&ContextFeatures>,
        policy: &RankingPolicy,
        outcome: &SessionOutcome,
    ) -> Result<()> {
        match self {
            Learner::NonContextual { stats, round } => {
                stats.update(outcome, policy);
                *round += 1;
            }
            Learner::Contextual { state, views, .. } => {
                state.observe(need_features(features)?, policy, outcome)?;
                for k in 0..outcome.viewed() {
                    views[policy.product_at(k)] += 1;
                }
            }
        }
        Ok(())
    }

    /// Optimistic estimates for the next consumer with exploration `weights`.
    pub fn optimistic(
        &self,
        features: Option<&ContextFeatures>,
        weights: &ExplorationWeights,
        config: &GlobalConfig,
    ) -> Result<OptimisticEstimates> {
        match self {
            Learner::NonContextual { stats, round } => {
                Ok(optimistic_estimates(stats, *round, weights, config))
            }
            Learner::Contextual { state, params, .. } => contextual_optimistic_estimates(
                state,
                need_features(features)?,
                params,
                config,
                Some(weights),
            ),
        }
    }

    /// Estimates without exploration bonus.
    pub fn greedy(
        &self,
        features: Option<&ContextFeatures>,
        config: &GlobalConfig,
    ) -> Result<OptimisticEstimates> {
        match self {
            Learner::NonContextual { stats, .. } => Ok(greedy_estimates(stats, config)),
            Learner::Contextual { .. } => {
                self.optimistic(features, &ExplorationWeights::greedy(), config)
            }
        }
    }
}

/// A ranking algorithm driven one consumer at a time.
pub trait RankingStrategy: Send {
    fn name(&self) -> &'static str;

    /// Ranking for the next consumer.
    fn select(&mut self, features: Option<&ContextFeatures>) -> Result<RankingPolicy>;

    /// Feedback from the consumer that was just served `policy`.
    fn observe(
        &mut self,
        features: Option<&ContextFeatures>,
        policy: &RankingPolicy,
        outcome: &SessionOutcome,
    ) -> Result<()> {
        self.learner_mut().observe(features, policy, outcome)
    }

    fn learner(&self) -> &Learner;

    fn learner_mut(&mut self) -> &mut Learner;
}

/// Optimistic estimates fed to the optimal sort with `s = w / q`.
pub struct MpbUcb {
    setup: StrategySetup,
    learner: Learner,
}

impl RankingStrategy for MpbUcb {
    fn name(&self) -> &'static str {
        "mpb_ucb"
    }

    fn select(&mut self, features: Option<&ContextFeatures>) -> Result<RankingPolicy> {
        let e = self
            .learner
            .optimistic(features, &self.setup.weights, &self.setup.config)?;
        Ok(optimal_ranking_for(
            &e.lambda_ucb,
            e.q_ucb,
            e.s(),
            self.setup.catalog.revenues(),
        ))
    }

    fn learner(&self) -> &Learner {
        &self.learner
    }

    fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }
}

/// Same estimates as [`MpbUcb`], budget ignored.
pub struct SinglePurchase {
    setup: StrategySetup,
    learner: Learner,
}

impl RankingStrategy for SinglePurchase {
    fn name(&self) -> &'static str {
        "single_purchase"
    }

    fn select(&mut self, features: Option<&ContextFeatures>) -> Result<RankingPolicy> {
        let e = self
            .learner
            .optimistic(features, &self.setup.weights, &self.setup.config)?;
        Ok(single_purchase_policy(&e, &self.setup.catalog))
    }

    fn learner(&self) -> &Learner {
        &self.learner
    }

    fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }
}

pub struct KeepViewing {
    setup: StrategySetup,
    learner: Learner,
}

impl RankingStrategy for KeepViewing {
    fn name(&self) -> &'static str {
        "keep_viewing"
    }

    fn select(&mut self, features: Option<&ContextFeatures>) -> Result<RankingPolicy> {
        let e = self
            .learner
            .optimistic(features, &self.setup.weights, &self.setup.config)?;
        Ok(keep_viewing_policy(&e, &self.setup.catalog))
    }

    fn learner(&self) -> &Learner {
        &self.learner
    }

    fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }
}

pub struct ExploreThenExploit {
    setup: StrategySetup,
    baseline: BaselineConfig,
    variant: ExploreVariant,
    learner: Learner,
}

impl RankingStrategy for ExploreThenExploit {
    fn name(&self) -> &'static str {
        match self.variant {
            ExploreVariant::A => "explore_exploit_a",
            ExploreVariant::B => "explore_exploit_b",
        }
    }

    fn select(&mut self, features: Option<&ContextFeatures>) -> Result<RankingPolicy> {
        let greedy = self.learner.greedy(features, &self.setup.config)?;
        Ok(explore_then_exploit_policy(
            self.learner.views(),
            &greedy,
            &self.setup.catalog,
            &self.baseline,
            self.variant,
        ))
    }

    fn learner(&self) -> &Learner {
        &self.learner
    }

    fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }
}

pub type StrategyFactory = fn(&StrategySetup) -> Result<Box<dyn RankingStrategy>>;

fn learner_for(setup: &StrategySetup) -> Result<Learner> {
    Learner::new(setup.catalog.len(), setup.context.as_ref())
}

fn build_mpb_ucb(setup: &StrategySetup) -> Result<Box<dyn RankingStrategy>> {
    Ok(Box::new(MpbUcb {
        learner: learner_for(setup)?,
        setup: setup.clone(),
    }))
}

fn build_single_purchase(setup: &StrategySetup) -> Result<Box<dyn RankingStrategy>> {
    Ok(Box::new(SinglePurchase {
        learner: learner_for(setup)?,
        setup: setup.clone(),
    }))
}

fn build_keep_viewing(setup: &StrategySetup) -> Result<Box<dyn RankingStrategy>> {
    Ok(Box::new(KeepViewing {
        learner: learner_for(setup)?,
        setup: setup.clone(),
    }))
}

fn build_explore(
    setup: &StrategySetup,
    variant: ExploreVariant,
) -> Result<Box<dyn RankingStrategy>> {
    let kind = match variant {
        ExploreVariant::A => BaselineKind::ExploreExploitA,
        ExploreVariant::B => BaselineKind::ExploreExploitB,
    };
    Ok(Box::new(ExploreThenExploit {
        baseline: BaselineConfig::new(kind, setup.delta, setup.horizon)?,
        variant,
        learner: learner_for(setup)?,
        setup: setup.clone(),
    }))
}

fn build_explore_a(setup: &StrategySetup) -> Result<Box<dyn RankingStrategy>> {
    build_explore(setup, ExploreVariant::A)
}

fn build_explore_b(setup: &StrategySetup) -> Result<Box<dyn RankingStrategy>> {
    build_explore(setup, ExploreVariant::B)
}

/// Name-to-factory table.
#[derive(Clone)]
pub struct StrategyRegistry {
    factories: BTreeMap<String, StrategyFactory>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with the learner and the four comparison policies.
    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register("mpb_ucb", build_mpb_ucb);
        r.register("single_purchase", build_single_purchase);
        r.register("keep_viewing", build_keep_viewing);
        r.register("explore_exploit_a", build_explore_a);
        r.register("explore_exploit_b", build_explore_b);
        r
    }

    pub fn register(&mut self, name: &str, factory: StrategyFactory) {
        self.factories.insert(name.to_owned(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, setup: &StrategySetup) -> Result<Box<dyn RankingStrategy>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownAlgorithm(name.to_owned()))?;
        factory(setup)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> StrategySetup {
        StrategySetup {
            catalog: ProductCatalog::new(vec![0.3, 0.9, 0.6]).unwrap(),
            config: GlobalConfig::default(),
            weights: ExplorationWeights::default(),
            delta: 1.0,
            horizon: 1000,
            context: None,
        }
    }

    #[test]
    fn builtin_names() {
        let r = StrategyRegistry::with_builtin();
        let names: Vec<&str> = r.names().collect();
        assert_eq!(
            names,
            vec![
                "explore_exploit_a",
                "explore_exploit_b",
                "keep_viewing",
                "mpb_ucb",
                "single_purchase"
            ]
        );
        for n in names {
            assert_eq!(r.create(n, &setup()).unwrap().name(), n);
        }
    }

    #[test]
    fn unknown_name() {
        let r = StrategyRegistry::with_builtin();
        assert!(matches!(
            r.create("thompson", &setup()),
            Err(Error::UnknownAlgorithm(_))
        ));
    }

    #[test]
    fn contextual_needs_features() {
        let mut s = setup();
        s.context = Some(ContextSetup {
            m_x: 2,
            m_y: 4,
            params: ContextualParams::default(),
        });
        let mut strat = StrategyRegistry::with_builtin()
            .create("mpb_ucb", &s)
            .unwrap();
        assert!(strat.select(None).is_err());
    }

    #[test]
    fn custom_registration() {
        let mut r = StrategyRegistry::empty();
        r.register("ucb", build_mpb_ucb);
        assert_eq!(r.create("ucb", &setup()).unwrap().name(), "mpb_ucb");
    }
}
