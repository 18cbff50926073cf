use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use serde_json::json;

use mpb_core::harness::{
    grid_search, run_experiment, summary_csv, write_experiment, write_grid, ExperimentConfig,
    GridConfig,
};
use mpb_core::ingest::{
    estimate_contextual, estimate_noncontextual, filter_products, read_log_file, read_price_list,
    records_for_session, sessionize, write_log, ParameterReport, ProductCandidate,
    DEFAULT_SESSION_GAP_SECONDS,
};
use mpb_core::model::ModelConfig;
use mpb_core::revenue::{brute_force_revenue, expected_revenue, optimal_ranking, ranking_score};
use mpb_core::sim::{consumer_rng, simulate_session, SimRng};
use mpb_core::{ConsumerProfile, ProductCatalog, RankingPolicy, StrategyRegistry};

#[derive(Parser)]
#[command(
    name = "mpb",
    version,
    about = "Multiple-purchase ranking: revenue, simulation and online learning"
)]
struct Cli {
    /// Base random seed (overrides the config file when given).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Model parameters from a file or from flags.
#[derive(Args)]
struct ModelArgs {
    /// TOML or JSON file with revenues, lambdas, q, s.
    #[arg(long, conflicts_with_all = ["revenues", "lambdas"])]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    revenues: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 0.9)]
    q: f64,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    #[arg(long, default_value_t = mpb_core::model::DEFAULT_EPSILON_Q)]
    epsilon_q: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<(ProductCatalog, ConsumerProfile)> {
        let cfg = match &self.model {
            Some(path) => ModelConfig::load(path)?,
            None => ModelConfig {
                revenues: self.revenues.clone(),
                lambdas: self.lambdas.clone(),
                q: self.q,
                s: self.s,
                epsilon_q: self.epsilon_q,
                seed: 0,
            },
        };
        let (catalog, profile, _) = cfg.build()?;
        Ok((catalog, profile))
    }
}

fn parse_policy(order: &[usize], n: usize) -> Result<Option<RankingPolicy>> {
    if order.is_empty() {
        return Ok(None);
    }
    let p = RankingPolicy::from_one_based(order)?;
    if p.len() != n {
        bail!("policy has {} entries for {} products", p.len(), n);
    }
    Ok(Some(p))
}

#[derive(Subcommand)]
enum Command {
    /// Simulate consumer sessions and print their traces.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// One-based ranking; defaults to the optimal one.
        #[arg(long, value_delimiter = ',')]
        policy: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        sessions: u64,
        /// Also write the sessions as an interaction log (CSV).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print the revenue-maximizing ranking.
    Rank {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Run an experiment config (TOML or JSON).
    Experiment {
        config: PathBuf,
        /// Strategy name overriding the config.
        #[arg(long)]
        algorithm: Option<String>,
    },
    /// Run a hyperparameter grid (`[base]` and `[grid]` tables).
    Grid { config: PathBuf },
    /// Estimate model parameters from an interaction log.
    Ingest {
        log: PathBuf,
        /// Inactivity gap (seconds) that starts a new session.
        #[arg(long, default_value_t = DEFAULT_SESSION_GAP_SECONDS)]
        gap: i64,
        /// Fit the linear coefficients from the feature columns.
        #[arg(long)]
        contextual: bool,
        #[arg(long, default_value_t = 1.0)]
        ridge: f64,
        /// `product_id,price` CSV; enables product filtering and sampling.
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long, default_value_t = 200.0)]
        max_price: f64,
        #[arg(long, default_value_t = 0.1)]
        min_lambda: f64,
        /// Number of products to sample after filtering.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Compare the dynamic program against brute-force enumeration.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',')]
        policy: Vec<usize>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Simulate {
            model,
            policy,
            sessions,
            log,
        } => {
            let (catalog, profile) = model.build()?;
            let policy = match parse_policy(&policy, catalog.len())? {
                Some(p) => p,
                None => optimal_ranking(&profile, &catalog)?,
            };
            let ids: Vec<String> = (1..=catalog.len()).map(|k| format!("p{k}")).collect();
            let mut lines = Vec::new();
            let mut records = Vec::new();
            for i in 0..sessions {
                let mut rng = consumer_rng(seed, 1, i + 1);
                let outcome = simulate_session(&profile, &policy, &mut rng);
                records.extend(records_for_session(
                    &format!("u{}", i + 1),
                    i as i64 * 3600,
                    60,
                    &policy,
                    &outcome,
                    &ids,
                    None,
                    None,
                ));
                lines.push(
                    json!({
                        "session": i + 1,
                        "policy": policy.order_one_based(),
                        "viewed": outcome.viewed(),
                        "purchases": outcome.purchases(),
                        "continuation": (0..outcome.viewed()).map(|k| outcome.continuation(k)).collect::<Vec<_>>(),
                        "revenue": outcome.realized_revenue(&policy, &catalog),
                    })
                    .to_string(),
                );
            }
            if let Some(path) = log {
                let file = std::fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                write_log(std::io::BufWriter::new(file), &records)?;
            }
            emit(cli.out.as_deref(), &lines.join("\n"))?;
        }
        Command::Rank { model } => {
            let (catalog, profile) = model.build()?;
            let best = optimal_ranking(&profile, &catalog)?;
            let scores: Vec<f64> = (0..catalog.len())
                .map(|k| {
                    ranking_score(
                        profile.lambda(k),
                        catalog.revenue(k),
                        profile.q(),
                        profile.s(),
                    )
                })
                .collect();
            let doc = json!({
                "order": best.order_one_based(),
                "expected_revenue": expected_revenue(&profile, &best, &catalog)?,
                "scores": scores,
            });
            emit(cli.out.as_deref(), &serde_json::to_string_pretty(&doc)?)?;
        }
        Command::Experiment { config, algorithm } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(a) = algorithm {
                cfg.algorithm = a;
            }
            let out = run_experiment(&cfg, &StrategyRegistry::with_builtin(), cli.threads)?;
            match cli.out.as_ref().or(cfg.out.as_ref()) {
                Some(dir) => write_experiment(&out, dir)?,
                None => print!("{}", summary_csv(&out.summary)),
            }
        }
        Command::Grid { config } => {
            let mut cfg = GridConfig::load(&config)?;
            if let Some(s) = cli.seed {
                cfg.base.seed = s;
            }
            let out = grid_search(&cfg, &StrategyRegistry::with_builtin(), cli.threads)?;
            match cli.out.as_ref().or(cfg.base.out.as_ref()) {
                Some(dir) => write_grid(&out, dir)?,
                None => println!("{}", serde_json::to_string_pretty(&out)?),
            }
        }
        Command::Ingest {
            log,
            gap,
            contextual,
            ridge,
            prices,
            max_price,
            min_lambda,
            sample,
        } => {
            let parsed = read_log_file(&log)?;
            if !parsed.skipped.is_empty() {
                eprintln!("skipped {} malformed rows", parsed.skipped.len());
            }
            let sessions = sessionize(&parsed.records, gap);
            let est = estimate_noncontextual(&sessions)?;
            let mut report = ParameterReport {
                product_ids: est.product_ids.clone(),
                lambdas: est.lambdas.clone(),
                q: Some(est.q),
                s: Some(est.s),
                counts: est.counts.clone(),
                skipped_rows: parsed.skipped.len(),
                ..Default::default()
            };
            if let Some(path) = prices {
                let price = read_price_list(&path)?;
                let candidates: Vec<ProductCandidate> = est
                    .product_ids
                    .iter()
                    .zip(&est.lambdas)
                    .filter_map(|(id, &lambda)| {
                        price.get(id).map(|&p| ProductCandidate {
                            id: id.clone(),
                            price: p,
                            lambda,
                        })
                    })
                    .collect();
                let n = sample.unwrap_or(candidates.len());
                let mut rng = SimRng::seed_from_u64(seed);
                let kept = filter_products(&candidates, max_price, min_lambda, n, &mut rng)?;
                report.product_ids = kept.ids;
                report.lambdas = kept.lambdas;
            }
            if contextual {
                let c = estimate_contextual(&sessions, ridge)?;
                report.beta_lambda = Some(c.beta_lambda);
                report.beta_q = Some(c.beta_q);
                report.beta_s = Some(c.beta_s);
            }
            emit(cli.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
        }
        Command::Oracle { model, policy } => {
            let (catalog, profile) = model.build()?;
            let policy = match parse_policy(&policy, catalog.len())? {
                Some(p) => p,
                None => RankingPolicy::identity(catalog.len()),
            };
            let dp = expected_revenue(&profile, &policy, &catalog)?;
            let brute = brute_force_revenue(&profile, &policy, &catalog)?;
            let doc = json!({
                "policy": policy.order_one_based(),
                "dynamic_program": dp,
                "brute_force": brute,
                "abs_diff": (dp - brute).abs(),
            });
            emit(cli.out.as_deref(), &serde_json::to_string_pretty(&doc)?)?;
            if (dp - brute).abs() >= 1e-9 {
                bail!("revenue mismatch: {dp} vs {brute}");
            }
        }
    }
    Ok(())
}
