//! Domain vocabulary shared by every other module: products, consumer
//! parameters, ranking permutations and observed browsing sessions.
//!
//! Product indices are zero-based in memory. Anything that crosses a file or
//! command-line boundary uses one-based indices via the `*_one_based` helpers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default lower bound on `1 - q`.
pub const DEFAULT_EPSILON_Q: f64 = 0.05;

/// Revenue earned per product when it is purchased.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProductCatalog {
    revenues: Vec<f64>,
}

impl ProductCatalog {
    pub fn new(revenues: Vec<f64>) -> Result<Self> {
        if revenues.is_empty() {
            return Err(invalid("catalog must contain at least one product"));
        }
        if let Some((k, r)) = revenues
            .iter()
            .enumerate()
            .find(|(_, r)| !r.is_finite() || **r < 0.0)
        {
            return Err(invalid(format!(
                "revenue of product {} must be finite and >= 0, got {r}",
                k + 1
            )));
        }
        Ok(Self { revenues })
    }

    pub fn len(&self) -> usize {
        self.revenues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revenues.is_empty()
    }

    pub fn revenue(&self, product: usize) -> f64 {
        self.revenues[product]
    }

    pub fn revenues(&self) -> &[f64] {
        &self.revenues
    }

    pub fn r_max(&self) -> f64 {
        self.revenues.iter().copied().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for ProductCatalog {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProductCatalog> for Vec<f64> {
    fn from(c: ProductCatalog) -> Self {
        c.revenues
    }
}

/// Behavioural parameters of one consumer (or of the whole population in the
/// non-contextual setting).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsumerProfile {
    lambdas: Vec<f64>,
    q: f64,
    s: f64,
}

impl ConsumerProfile {
    /// Validates every parameter, including `q <= 1 - epsilon_q`.
    pub fn new(lambdas: Vec<f64>, q: f64, s: f64, epsilon_q: f64) -> Result<Self> {
        if !(epsilon_q > 0.0 && epsilon_q < 1.0) {
            return Err(invalid(format!(
                "epsilon_q must lie in (0,1), got {epsilon_q}"
            )));
        }
        if lambdas.is_empty() {
            return Err(invalid("profile needs at least one purchase probability"));
        }
        if let Some((k, l)) = lambdas
            .iter()
            .enumerate()
            .find(|(_, l)| !(0.0..=1.0).contains(*l))
        {
            return Err(invalid(format!(
                "lambda of product {} must lie in [0,1], got {l}",
                k + 1
            )));
        }
        if !(0.0..=1.0 - epsilon_q).contains(&q) {
            return Err(invalid(format!(
                "q must lie in [0, 1 - epsilon_q] = [0, {}], got {q}",
                1.0 - epsilon_q
            )));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid(format!("s must lie in [0,1], got {s}")));
        }
        Ok(Self { lambdas, q, s })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambda(&self, product: usize) -> f64 {
        self.lambdas[product]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Probability of continuing to browse after a purchase.
    pub fn w(&self) -> f64 {
        self.q * self.s
    }
}

/// A permutation of products: `order[k]` is the product at display position `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct RankingPolicy {
    order: Vec<usize>,
    inverse: Vec<usize>,
}

impl RankingPolicy {
    /// Builds a policy from a zero-based order.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(invalid("ranking must contain at least one product"));
        }
        let mut inverse = vec![usize::MAX; n];
        for (pos, &product) in order.iter().enumerate() {
            if product >= n {
                return Err(invalid(format!(
                    "product index {} out of range 1..={n}",
                    product + 1
                )));
            }
            if inverse[product] != usize::MAX {
                return Err(invalid(format!("product {} listed twice", product + 1)));
            }
            inverse[product] = pos;
        }
        Ok(Self { order, inverse })
    }

    /// Builds a policy from a one-based order, as used on the command line and
    /// in files.
    pub fn from_one_based(order: &[usize]) -> Result<Self> {
        let zero = order
            .iter()
            .map(|&i| {
                i.checked_sub(1)
                    .ok_or_else(|| invalid("product indices are one-based; got 0"))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Product displayed at `position`.
    pub fn product_at(&self, position: usize) -> usize {
        self.order[position]
    }

    /// Display position of `product`.
    pub fn position_of(&self, product: usize) -> usize {
        self.inverse[product]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn order_one_based(&self) -> Vec<usize> {
        self.order.iter().map(|i| i + 1).collect()
    }

    pub fn inverse_one_based(&self) -> Vec<usize> {
        self.inverse.iter().map(|i| i + 1).collect()
    }

    /// Same ranking with positions `i` and `i + 1` exchanged.
    pub fn swapped(&self, i: usize) -> Self {
        let mut order = self.order.clone();
        order.swap(i, i + 1);
        Self::new(order).expect("swap preserves the permutation")
    }
}

impl TryFrom<Vec<usize>> for RankingPolicy {
    type Error = Error;

    fn try_from(order: Vec<usize>) -> Result<Self> {
        Self::new(order)
    }
}

impl From<RankingPolicy> for Vec<usize> {
    fn from(p: RankingPolicy) -> Self {
        p.order
    }
}

/// Observed browse trace of one consumer.
///
/// `purchases[k]` is the purchase indicator at display position `k` for the
/// first `viewed` positions. `continuation[k]` is whether the consumer went on
/// to the next position; it reads as the skip-continuation when nothing was
/// bought at `k` and as the buy-continuation otherwise. `None` marks an
/// unobserved continuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOutcome {
    purchases: Vec<bool>,
    continuation: Vec<Option<bool>>,
}

impl SessionOutcome {
    pub fn new(purchases: Vec<bool>, continuation: Vec<Option<bool>>) -> Result<Self> {
        if purchases.is_empty() {
            return Err(invalid("a session views at least one product"));
        }
        if continuation.len() != purchases.len() {
            return Err(Error::Dimension {
                expected: purchases.len(),
                got: continuation.len(),
            });
        }
        let last = purchases.len() - 1;
        if continuation[..last].contains(&Some(false)) {
            return Err(invalid(
                "browsing cannot stop before the last viewed position",
            ));
        }
        Ok(Self {
            purchases,
            continuation,
        })
    }

    /// Number of viewed products.
    pub fn viewed(&self) -> usize {
        self.purchases.len()
    }

    pub fn purchases(&self) -> &[bool] {
        &self.purchases
    }

    pub fn purchased(&self, position: usize) -> bool {
        self.purchases[position]
    }

    pub fn continuation(&self, position: usize) -> Option<bool> {
        self.continuation[position]
    }

    /// Continue-after-skip indicator; defined only where nothing was bought.
    pub fn eta(&self, position: usize) -> Option<bool> {
        if self.purchases[position] {
            None
        } else {
            self.continuation[position]
        }
    }

    /// Continue-after-buy indicator; defined only where a purchase happened.
    pub fn mu(&self, position: usize) -> Option<bool> {
        if self.purchases[position] {
            self.continuation[position]
        } else {
            None
        }
    }

    pub fn purchase_count(&self) -> usize {
        self.purchases.iter().filter(|b| **b).count()
    }

    /// Revenue realized under `policy`.
    pub fn realized_revenue(&self, policy: &RankingPolicy, catalog: &ProductCatalog) -> f64 {
        self.purchases
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(k, _)| catalog.revenue(policy.product_at(k)))
            .fold(0.0, |acc, r| acc + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalConfig {
    pub epsilon_q: f64,
    pub rng_seed: u64,
}

impl GlobalConfig {
    pub fn new(epsilon_q: f64, rng_seed: u64) -> Result<Self> {
        if !(epsilon_q > 0.0 && epsilon_q < 1.0) {
            return Err(invalid(format!(
                "epsilon_q must lie in (0,1), got {epsilon_q}"
            )));
        }
        Ok(Self {
            epsilon_q,
            rng_seed,
        })
    }

    pub fn q_cap(&self) -> f64 {
        1.0 - self.epsilon_q
    }
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            epsilon_q: DEFAULT_EPSILON_Q,
            rng_seed: 0,
        }
    }
}

/// On-disk description of a catalog together with the consumer profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub revenues: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub q: f64,
    pub s: f64,
    #[serde(default = "default_epsilon_q")]
    pub epsilon_q: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon_q() -> f64 {
    DEFAULT_EPSILON_Q
}

impl ModelConfig {
    /// Reads a `.toml` or `.json` file (chosen by extension, JSON otherwise).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_config(path.as_ref())
    }

    pub fn build(&self) -> Result<(ProductCatalog, ConsumerProfile, GlobalConfig)> {
        if self.revenues.len() != self.lambdas.len() {
            return Err(Error::Dimension {
                expected: self.revenues.len(),
                got: self.lambdas.len(),
            });
        }
        let catalog = ProductCatalog::new(self.revenues.clone())?;
        let profile = ConsumerProfile::new(self.lambdas.clone(), self.q, self.s, self.epsilon_q)?;
        let config = GlobalConfig::new(self.epsilon_q, self.seed)?;
        Ok((catalog, profile, config))
    }
}

/// Deserializes a TOML or JSON file depending on its extension.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_toml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
