//! Ranking under a multiple-purchase browsing model.
//!
//! A consumer scans a ranked list, buys each viewed product independently
//! with its purchase probability, and stops once a random attention span or a
//! random purchase budget runs out. The crate computes expected revenue and
//! the revenue-maximizing ranking, simulates consumers, and learns the model
//! online with upper-confidence-bound strategies (with or without features).

pub mod baselines;
pub mod contextual;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod model;
pub mod noncontextual;
pub mod revenue;
pub mod sim;
pub mod strategy;

pub use error::{Error, Result};
pub use model::{ConsumerProfile, GlobalConfig, ProductCatalog, RankingPolicy, SessionOutcome};
pub use revenue::{brute_force_revenue, expected_revenue, optimal_ranking};
pub use strategy::{RankingStrategy, StrategyRegistry};
