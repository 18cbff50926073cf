//! Experiment runner: instance generation, regret bookkeeping, multi-seed
//! runs, hyperparameter grids and CSV/JSON output.
//!
//! The instance (catalog, consumer parameters or coefficients and the
//! consumer feature stream) is drawn once from the base seed. Each seed then
//! replays the same consumers with fresh session randomness drawn from a
//! per-consumer stream, so results do not depend on scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contextual::{
    joint_feature, norm, ContextFeatures, ContextualParams, GroundTruthCoefficients,
};
use crate::error::{invalid, Error, Result};
use crate::model::{
    ConsumerProfile, GlobalConfig, ProductCatalog, RankingPolicy, DEFAULT_EPSILON_Q,
};
use crate::noncontextual::ExplorationWeights;
use crate::revenue::{optimal_ranking_for, revenue_of};
use crate::sim::{consumer_rng, derive_seed, simulate_session, SimRng};
use crate::strategy::{ContextSetup, Learner, RankingStrategy, StrategyRegistry, StrategySetup};

const INSTANCE_LABEL: u64 = 0x1157_a9ce;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    NonContextual,
    Contextual,
}

/// Fixed parameters replacing the random non-contextual instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitInstance {
    pub revenues: Vec<f64>,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub n_products: usize,
    pub horizon: u64,
    pub n_seeds: u64,
    /// Base seed for the instance and all session streams.
    pub seed: u64,
    /// Non-contextual attention and budget continuation.
    pub q: f64,
    pub s: f64,
    /// Upper end of the purchase-probability range (non-contextual) or the
    /// largest realized purchase probability (contextual).
    pub lambda_max: f64,
    pub q_max: f64,
    pub s_max: f64,
    pub m_x: usize,
    pub algorithm: String,
    /// Radius multipliers; unset means `sqrt(2)` (non-contextual) or one
    /// (contextual).
    pub xi_lambda: Option<f64>,
    pub xi_q: Option<f64>,
    pub xi_w: Option<f64>,
    pub delta: f64,
    pub alpha_lambda: f64,
    pub alpha_q: f64,
    pub alpha_w: f64,
    pub epsilon_q: f64,
    /// Coefficient norm bound; unset means the true coefficients' largest
    /// norm.
    pub u_bound: Option<f64>,
    pub checkpoints: usize,
    /// Record every round instead of log-spaced checkpoints.
    pub every_round: bool,
    /// Rounds recorded in addition to the log-spaced checkpoints.
    pub extra_checkpoints: Vec<u64>,
    pub instance: Option<ExplicitInstance>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::NonContextual,
            n_products: 50,
            horizon: 50_000,
            n_seeds: 5,
            seed: 0,
            q: 0.9,
            s: 0.5,
            lambda_max: 0.3,
            q_max: 0.9,
            s_max: 0.5,
            m_x: 5,
            algorithm: "mpb_ucb".into(),
            xi_lambda: None,
            xi_q: None,
            xi_w: None,
            delta: 1.0,
            alpha_lambda: 1.0,
            alpha_q: 1.0,
            alpha_w: 1.0,
            epsilon_q: DEFAULT_EPSILON_Q,
            u_bound: None,
            checkpoints: 50,
            every_round: false,
            extra_checkpoints: Vec::new(),
            instance: None,
            out: None,
        }
    }
}

fn check_prob(name: &str, v: f64, hi: f64) -> Result<()> {
    if !(0.0..=hi).contains(&v) {
        return Err(invalid(format!("{name} must lie in [0, {hi}], got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::model::load_config(path.as_ref())
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if self.n_seeds == 0 {
            return Err(invalid("n_seeds must be at least 1"));
        }
        if self.n_products == 0 {
            return Err(invalid("n_products must be at least 1"));
        }
        GlobalConfig::new(self.epsilon_q, self.seed)?;
        let cap = 1.0 - self.epsilon_q;
        check_prob("q", self.q, cap)?;
        check_prob("s", self.s, 1.0)?;
        check_prob("lambda_max", self.lambda_max, 1.0)?;
        check_prob("q_max", self.q_max, cap)?;
        check_prob("s_max", self.s_max, 1.0)?;
        if self.setting == Setting::Contextual && self.m_x == 0 {
            return Err(invalid("m_x must be at least 1"));
        }
        if let Some(inst) = &self.instance {
            if inst.revenues.len() != self.n_products || inst.lambdas.len() != self.n_products {
                return Err(Error::Dimension {
                    expected: self.n_products,
                    got: inst.revenues.len().min(inst.lambdas.len()),
                });
            }
        }
        for a in [self.alpha_lambda, self.alpha_q, self.alpha_w] {
            if !(a.is_finite() && a > 0.0) {
                return Err(invalid(format!("ridge strengths must be > 0, got {a}")));
            }
        }
        self.weights()?;
        Ok(())
    }

    pub fn global(&self) -> Result<GlobalConfig> {
        GlobalConfig::new(self.epsilon_q, self.seed)
    }

    pub fn weights(&self) -> Result<ExplorationWeights> {
        let default = match self.setting {
            Setting::NonContextual => std::f64::consts::SQRT_2,
            Setting::Contextual => 1.0,
        };
        ExplorationWeights::new(
            self.xi_lambda.unwrap_or(default),
            self.xi_q.unwrap_or(default),
            self.xi_w.unwrap_or(default),
        )
    }

    pub fn m_y(&self) -> usize {
        2 * self.m_x
    }
}

/// Uniform revenues in `[0, 1]` and purchase probabilities in
/// `[0, lambda_max]`.
pub fn generate_noncontextual_instance<R: Rng + ?Sized>(
    n: usize,
    q: f64,
    s: f64,
    lambda_max: f64,
    epsilon_q: f64,
    rng: &mut R,
) -> Result<(ProductCatalog, ConsumerProfile)> {
    if n == 0 {
        return Err(invalid("need at least one product"));
    }
    let revenues = (0..n).map(|_| rng.random::<f64>()).collect();
    let lambdas = (0..n).map(|_| rng.random::<f64>() * lambda_max).collect();
    Ok((
        ProductCatalog::new(revenues)?,
        ConsumerProfile::new(lambdas, q, s, epsilon_q)?,
    ))
}

/// Coefficients plus the consumer feature stream of a contextual instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextualStream {
    pub coefficients: GroundTruthCoefficients,
    /// One raw feature vector per product, `m_x` entries each.
    pub product_features: Vec<Vec<f64>>,
    /// One feature vector per arriving consumer.
    pub consumers: Vec<Vec<f64>>,
}

impl ContextualStream {
    pub fn features(&self, consumer: usize) -> ContextFeatures {
        let x = &self.consumers[consumer];
        let y = self
            .product_features
            .iter()
            .map(|p| joint_feature(x, p))
            .collect();
        ContextFeatures::new(x.clone(), y).expect("generated features have unit-bounded norms")
    }
}

fn scale_to(beta: &mut [f64], current_max: f64, target: f64) {
    let f = if current_max > 0.0 {
        target / current_max
    } else {
        0.0
    };
    beta.iter_mut().for_each(|b| *b *= f);
}

/// Consumer features uniform in `[0.8/sqrt(m_x), 1/sqrt(m_x)]`, product
/// features uniform in `[0, 1/sqrt(m_x)]`, coefficients uniform in `[0, 1]`
/// and rescaled so the largest purchase probability, attention and budget
/// continuation over the stream equal `lambda_max`, `q_max` and `s_max`.
#[allow(clippy::too_many_arguments)]
pub fn generate_contextual_stream<R: Rng + ?Sized>(
    n: usize,
    m_x: usize,
    n_consumers: usize,
    lambda_max: f64,
    q_max: f64,
    s_max: f64,
    rng: &mut R,
) -> Result<ContextualStream> {
    if m_x == 0 || n == 0 || n_consumers == 0 {
        return Err(invalid("need m_x, products and consumers to be positive"));
    }
    let top = 1.0 / (m_x as f64).sqrt();
    let product_features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m_x).map(|_| rng.random::<f64>() * top).collect())
        .collect();
    let consumers: Vec<Vec<f64>> = (0..n_consumers)
        .map(|_| {
            (0..m_x)
                .map(|_| rng.random_range(0.8 * top..=top))
                .collect()
        })
        .collect();
    let mut beta_lambda: Vec<f64> = (0..2 * m_x).map(|_| rng.random()).collect();
    let mut beta_q: Vec<f64> = (0..m_x).map(|_| rng.random()).collect();
    let mut beta_s: Vec<f64> = (0..m_x).map(|_| rng.random()).collect();

    let dot = crate::contextual::dot;
    let max_over = |f: &dyn Fn(&[f64]) -> f64| consumers.iter().map(|x| f(x)).fold(0.0, f64::max);
    let lam_max = max_over(&|x| {
        product_features
            .iter()
            .map(|p| dot(&joint_feature(x, p), &beta_lambda))
            .fold(0.0, f64::max)
    });
    let q_now = max_over(&|x| dot(x, &beta_q));
    let s_now = max_over(&|x| dot(x, &beta_s));
    scale_to(&mut beta_lambda, lam_max, lambda_max);
    scale_to(&mut beta_q, q_now, q_max);
    scale_to(&mut beta_s, s_now, s_max);
    Ok(ContextualStream {
        coefficients: GroundTruthCoefficients {
            beta_lambda,
            beta_q,
            beta_s,
        },
        product_features,
        consumers,
    })
}

/// Expected-revenue gap between the optimal ranking for `profile` and
/// `chosen`.
pub fn per_round_regret(
    chosen: &RankingPolicy,
    profile: &ConsumerProfile,
    catalog: &ProductCatalog,
) -> f64 {
    let (l, q, s) = (profile.lambdas(), profile.q(), profile.s());
    let best = optimal_ranking_for(l, q, s, catalog.revenues());
    revenue_of(l, q, s, &best, catalog.revenues()) - revenue_of(l, q, s, chosen, catalog.revenues())
}

/// The data a run is played against.
#[derive(Debug, Clone)]
pub enum Instance {
    NonContextual {
        catalog: ProductCatalog,
        profile: ConsumerProfile,
        optimal_revenue: f64,
    },
    Contextual {
        catalog: ProductCatalog,
        stream: ContextualStream,
        /// Optimal expected revenue of each consumer in the stream.
        optimal_revenue: Vec<f64>,
    },
}

impl Instance {
    pub fn generate(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let global = config.global()?;
        let mut rng = SimRng::seed_from_u64(derive_seed(config.seed, INSTANCE_LABEL));
        match config.setting {
            Setting::NonContextual => {
                let (catalog, profile) = match &config.instance {
                    Some(inst) => (
                        ProductCatalog::new(inst.revenues.clone())?,
                        ConsumerProfile::new(
                            inst.lambdas.clone(),
                            config.q,
                            config.s,
                            config.epsilon_q,
                        )?,
                    ),
                    None => generate_noncontextual_instance(
                        config.n_products,
                        config.q,
                        config.s,
                        config.lambda_max,
                        config.epsilon_q,
                        &mut rng,
                    )?,
                };
                let best = optimal_ranking_for(
                    profile.lambdas(),
                    profile.q(),
                    profile.s(),
                    catalog.revenues(),
                );
                let optimal_revenue = revenue_of(
                    profile.lambdas(),
                    profile.q(),
                    profile.s(),
                    &best,
                    catalog.revenues(),
                );
                Ok(Instance::NonContextual {
                    catalog,
                    profile,
                    optimal_revenue,
                })
            }
            Setting::Contextual => {
                let revenues = match &config.instance {
                    Some(inst) => inst.revenues.clone(),
                    None => (0..config.n_products)
                        .map(|_| rng.random::<f64>())
                        .collect(),
                };
                let catalog = ProductCatalog::new(revenues)?;
                let stream = generate_contextual_stream(
                    config.n_products,
                    config.m_x,
                    config.horizon as usize,
                    config.lambda_max,
                    config.q_max,
                    config.s_max,
                    &mut rng,
                )?;
                let optimal_revenue = (0..stream.consumers.len())
                    .map(|i| {
                        let p = stream
                            .coefficients
                            .profile_for(&stream.features(i), &global);
                        let best =
                            optimal_ranking_for(p.lambdas(), p.q(), p.s(), catalog.revenues());
                        revenue_of(p.lambdas(), p.q(), p.s(), &best, catalog.revenues())
                    })
                    .collect();
                Ok(Instance::Contextual {
                    catalog,
                    stream,
                    optimal_revenue,
                })
            }
        }
    }

    pub fn catalog(&self) -> &ProductCatalog {
        match self {
            Instance::NonContextual { catalog, .. } | Instance::Contextual { catalog, .. } => {
                catalog
            }
        }
    }
}

/// Log-spaced rounds in `[1, horizon]` (rounded, deduplicated), always
/// ending at the horizon.
pub fn checkpoints(horizon: u64, count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = if count <= 1 || horizon <= 1 {
        Vec::new()
    } else {
        let top = (horizon as f64).ln();
        (0..count)
            .map(|i| (top * i as f64 / (count - 1) as f64).exp().round() as u64)
            .map(|t| t.clamp(1, horizon))
            .collect()
    };
    out.push(horizon);
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub regret: f64,
    pub avg_revenue: f64,
    pub ratio: f64,
    /// Distance of the attention coefficient estimate to the truth
    /// (contextual runs only).
    pub beta_q_error: Option<f64>,
}

/// Final point estimates of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FinalEstimates {
    NonContextual {
        lambdas: Vec<Option<f64>>,
        q: Option<f64>,
        w: Option<f64>,
    },
    Contextual {
        beta_lambda: Vec<f64>,
        beta_q: Vec<f64>,
        beta_w: Vec<f64>,
    },
}

fn final_estimates(learner: &Learner) -> Result<FinalEstimates> {
    Ok(match learner {
        Learner::NonContextual { stats, .. } => {
            let p = crate::noncontextual::point_estimates(stats);
            FinalEstimates::NonContextual {
                lambdas: p.lambdas,
                q: p.q,
                w: p.w,
            }
        }
        Learner::Contextual { state, .. } => FinalEstimates::Contextual {
            beta_lambda: state.lambda.solve_beta()?,
            beta_q: state.q.solve_beta()?,
            beta_w: state.w.solve_beta()?,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: String,
    pub seed_index: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub final_estimates: FinalEstimates,
    pub wall_clock_seconds: f64,
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.regret)
    }
}

fn strategy_setup(config: &ExperimentConfig, instance: &Instance) -> Result<StrategySetup> {
    let context = match instance {
        Instance::NonContextual { .. } => None,
        Instance::Contextual { stream, .. } => Some(ContextSetup {
            m_x: config.m_x,
            m_y: config.m_y(),
            params: ContextualParams {
                alpha_lambda: config.alpha_lambda,
                alpha_q: config.alpha_q,
                alpha_w: config.alpha_w,
                u_bound: config
                    .u_bound
                    .unwrap_or_else(|| stream.coefficients.u_bound()),
                weights: config.weights()?,
            },
        }),
    };
    Ok(StrategySetup {
        catalog: instance.catalog().clone(),
        config: config.global()?,
        weights: config.weights()?,
        delta: config.delta,
        horizon: config.horizon,
        context,
    })
}

/// Plays one seed of `config` against `instance`.
pub fn run_single(
    config: &ExperimentConfig,
    instance: &Instance,
    registry: &StrategyRegistry,
    seed_index: u64,
) -> Result<RunResult> {
    let started = Instant::now();
    let setup = strategy_setup(config, instance)?;
    let mut strategy: Box<dyn RankingStrategy> = registry.create(&config.algorithm, &setup)?;
    let global = setup.config;
    let catalog = instance.catalog();
    let mut marks = if config.every_round {
        (1..=config.horizon).collect()
    } else {
        checkpoints(config.horizon, config.checkpoints)
    };
    marks.extend(
        config
            .extra_checkpoints
            .iter()
            .filter(|&&t| (1..=config.horizon).contains(&t)),
    );
    marks.sort_unstable();
    marks.dedup();
    let mut next_mark = marks.iter().peekable();
    let (mut regret, mut achieved, mut optimal) = (0.0, 0.0, 0.0);
    let mut out = Vec::with_capacity(marks.len());
    let run_label = seed_index + 1;

    for t in 1..=config.horizon {
        let mut rng = consumer_rng(config.seed, run_label, t);
        let (features, profile, best) = match instance {
            Instance::NonContextual {
                profile,
                optimal_revenue,
                ..
            } => (None, profile.clone(), *optimal_revenue),
            Instance::Contextual {
                stream,
                optimal_revenue,
                ..
            } => {
                let i = (t - 1) as usize;
                let f = stream.features(i);
                let p = stream.coefficients.profile_for(&f, &global);
                (Some(f), p, optimal_revenue[i])
            }
        };
        let policy = strategy.select(features.as_ref())?;
        let got = revenue_of(
            profile.lambdas(),
            profile.q(),
            profile.s(),
            &policy,
            catalog.revenues(),
        );
        regret += best - got;
        achieved += got;
        optimal += best;
        let outcome = simulate_session(&profile, &policy, &mut rng);
        strategy.observe(features.as_ref(), &policy, &outcome)?;

        if next_mark.peek() == Some(&&t) {
            next_mark.next();
            let beta_q_error = match (instance, strategy.learner()) {
                (Instance::Contextual { stream, .. }, Learner::Contextual { state, .. }) => {
                    let est = state.q.solve_beta()?;
                    let diff: Vec<f64> = est
                        .iter()
                        .zip(&stream.coefficients.beta_q)
                        .map(|(a, b)| a - b)
                        .collect();
                    Some(norm(&diff))
                }
                _ => None,
            };
            out.push(Checkpoint {
                t,
                regret,
                avg_revenue: achieved / t as f64,
                ratio: if optimal > 0.0 {
                    achieved / optimal
                } else {
                    1.0
                },
                beta_q_error,
            });
        }
    }
    Ok(RunResult {
        algorithm: config.algorithm.clone(),
        seed_index,
        checkpoints: out,
        final_estimates: final_estimates(strategy.learner())?,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Across-seed aggregate at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: u64,
    pub regret_mean: f64,
    pub regret_std: f64,
    pub avg_revenue_mean: f64,
    pub ratio_mean: f64,
    pub seed_count: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(results: &[RunResult]) -> Vec<SummaryRow> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    (0..first.checkpoints.len())
        .map(|i| {
            let col = |f: fn(&Checkpoint) -> f64| -> Vec<f64> {
                results.iter().map(|r| f(&r.checkpoints[i])).collect()
            };
            let (regret_mean, regret_std) = mean_std(&col(|c| c.regret));
            SummaryRow {
                t: first.checkpoints[i].t,
                regret_mean,
                regret_std,
                avg_revenue_mean: mean_std(&col(|c| c.avg_revenue)).0,
                ratio_mean: mean_std(&col(|c| c.ratio)).0,
                seed_count: results.len(),
            }
        })
        .collect()
}

/// Renders the summary with 17 significant digits per value.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("t,regret_mean,regret_std,avg_revenue_mean,ratio_mean,seed_count\n");
    for r in rows {
        writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.t, r.regret_mean, r.regret_std, r.avg_revenue_mean, r.ratio_mean, r.seed_count
        )
        .expect("writing to a String");
    }
    s
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every seed of `config`; `threads = 0` lets the pool pick.
pub fn run_experiment(
    config: &ExperimentConfig,
    registry: &StrategyRegistry,
    threads: usize,
) -> Result<ExperimentOutput> {
    let instance = Instance::generate(config)?;
    // Fail on an unknown name before spawning work.
    registry.create(&config.algorithm, &strategy_setup(config, &instance)?)?;
    let runs = pool(threads)?.install(|| {
        (0..config.n_seeds)
            .into_par_iter()
            .map(|seed| run_single(config, &instance, registry, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    info!(
        "{}: {} seeds, final mean regret {:.4}",
        config.algorithm,
        runs.len(),
        runs.iter().map(RunResult::final_regret).sum::<f64>() / runs.len() as f64
    );
    let summary = summarize(&runs);
    Ok(ExperimentOutput {
        config: config.clone(),
        runs,
        summary,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `summary.csv` and `results.json` into `dir`.
pub fn write_experiment(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("summary.csv"), &summary_csv(&output.summary))?;
    write_file(
        &dir.join("results.json"),
        &serde_json::to_string_pretty(output)?,
    )
}

/// Value lists to sweep; an empty list keeps the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub xi_lambda: Vec<f64>,
    pub xi_q: Vec<f64>,
    pub xi_w: Vec<f64>,
    pub delta: Vec<f64>,
    /// Applied to all three ridge strengths.
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub base: ExperimentConfig,
    pub grid: GridSpec,
}

impl GridConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::model::load_config(path.as_ref())
    }

    /// Cartesian product of the grid applied to the base config.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let base = &self.base;
        let w = base.weights()?;
        let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
        let g = &self.grid;
        let mut out = Vec::new();
        for &xl in &or(&g.xi_lambda, w.xi_lambda) {
            for &xq in &or(&g.xi_q, w.xi_q) {
                for &xw in &or(&g.xi_w, w.xi_w) {
                    for &d in &or(&g.delta, base.delta) {
                        for &a in &or(&g.alpha, base.alpha_lambda) {
                            let mut c = base.clone();
                            c.xi_lambda = Some(xl);
                            c.xi_q = Some(xq);
                            c.xi_w = Some(xw);
                            c.delta = d;
                            if !g.alpha.is_empty() {
                                c.alpha_lambda = a;
                                c.alpha_q = a;
                                c.alpha_w = a;
                            }
                            c.validate()?;
                            out.push(c);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub xi_lambda: f64,
    pub xi_q: f64,
    pub xi_w: f64,
    pub delta: f64,
    pub alpha: f64,
    pub final_regret_mean: f64,
    pub per_seed_final_regret: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridOutput {
    pub runs_recorded: usize,
    /// Ascending final mean regret; the first entry is the best config.
    pub entries: Vec<GridEntry>,
}

/// Runs every grid point with all seeds; all `(config, seed)` pairs share
/// one pool.
pub fn grid_search(
    grid: &GridConfig,
    registry: &StrategyRegistry,
    threads: usize,
) -> Result<GridOutput> {
    let configs = grid.expand()?;
    let instance = Instance::generate(&grid.base)?;
    registry.create(
        &grid.base.algorithm,
        &strategy_setup(&grid.base, &instance)?,
    )?;
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| (0..grid.base.n_seeds).map(move |s| (c, s)))
        .collect();
    let runs = pool(threads)?.install(|| {
        jobs.par_iter()
            .map(|&(c, s)| {
                run_single(&configs[c], &instance, registry, s).map(|r| r.final_regret())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let per_config = grid.base.n_seeds as usize;
    let mut entries: Vec<GridEntry> = configs
        .iter()
        .zip(runs.chunks(per_config))
        .map(|(c, regrets)| {
            let w = c.weights().expect("validated");
            GridEntry {
                xi_lambda: w.xi_lambda,
                xi_q: w.xi_q,
                xi_w: w.xi_w,
                delta: c.delta,
                alpha: c.alpha_lambda,
                final_regret_mean: mean_std(regrets).0,
                per_seed_final_regret: regrets.to_vec(),
            }
        })
        .collect();
    entries.sort_by(|a, b| a.final_regret_mean.total_cmp(&b.final_regret_mean));
    Ok(GridOutput {
        runs_recorded: runs.len(),
        entries,
    })
}

pub fn grid_csv(output: &GridOutput) -> String {
    let mut s = String::from("rank,xi_lambda,xi_q,xi_w,delta,alpha,final_regret_mean\n");
    for (i, e) in output.entries.iter().enumerate() {
        writeln!(
            s,
            "{},{},{},{},{},{},{:.16e}",
            i + 1,
            e.xi_lambda,
            e.xi_q,
            e.xi_w,
            e.delta,
            e.alpha,
            e.final_regret_mean
        )
        .expect("writing to a String");
    }
    s
}

/// Writes `grid.csv` and `grid.json` into `dir`.
pub fn write_grid(output: &GridOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("grid.csv"), &grid_csv(output))?;
    write_file(
        &dir.join("grid.json"),
        &serde_json::to_string_pretty(output)?,
    )
}
