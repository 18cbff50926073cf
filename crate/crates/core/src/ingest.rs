//! Interaction-log ingestion for semi-synthetic experiments.
//!
//! Logs are CSV files with a header
//! `user_id,timestamp,product_id,purchased[,f_u_1..f_u_mx][,f_p_1..f_p_k]`.
//! Records are split into browsing sessions at inactivity gaps, then the
//! counting statistics (or ridge regressions, when features are present) are
//! rebuilt from the sessions.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contextual::{factor_rank_one, joint_feature, outer_vec, RidgeState};
use crate::error::{invalid, Error, Result};
use crate::model::{ProductCatalog, RankingPolicy, SessionOutcome};

/// Ten minutes.
pub const DEFAULT_SESSION_GAP_SECONDS: i64 = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub user_id: String,
    /// Seconds since the epoch.
    pub timestamp: i64,
    pub product_id: String,
    pub purchased: bool,
    pub user_features: Option<Vec<f64>>,
    pub product_features: Option<Vec<f64>>,
}

/// A malformed row that was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// One-based line number in the file, header included.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub records: Vec<LogRecord>,
    pub skipped: Vec<RowError>,
    pub user_dim: usize,
    pub product_dim: usize,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Reads a log, skipping (and reporting) malformed rows.
pub fn read_log<R: Read>(reader: R) -> Result<ParsedLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected = ["user_id", "timestamp", "product_id", "purchased"];
    for (i, name) in expected.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(invalid(format!(
                "log header column {} must be '{name}', got {:?}",
                i + 1,
                header.get(i)
            )));
        }
    }
    let mut user_cols = Vec::new();
    let mut product_cols = Vec::new();
    for (i, name) in header.iter().enumerate().skip(4) {
        if name.starts_with("f_u_") {
            user_cols.push(i);
        } else if name.starts_with("f_p_") {
            product_cols.push(i);
        } else {
            return Err(invalid(format!("unexpected log column '{name}'")));
        }
    }

    let mut out = ParsedLog {
        user_dim: user_cols.len(),
        product_dim: product_cols.len(),
        ..Default::default()
    };
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let parsed = (|| -> std::result::Result<LogRecord, String> {
            if row.len() != header.len() {
                return Err(format!(
                    "expected {} fields, found {}",
                    header.len(),
                    row.len()
                ));
            }
            let timestamp: i64 = row[1]
                .parse()
                .map_err(|_| format!("bad timestamp '{}'", &row[1]))?;
            let purchased =
                parse_bool(&row[3]).ok_or_else(|| format!("bad purchase flag '{}'", &row[3]))?;
            let floats = |cols: &[usize]| -> std::result::Result<Option<Vec<f64>>, String> {
                if cols.is_empty() {
                    return Ok(None);
                }
                cols.iter()
                    .map(|&c| {
                        row[c]
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| format!("bad feature '{}'", &row[c]))
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map(Some)
            };
            if row[0].is_empty() || row[2].is_empty() {
                return Err("empty user or product id".into());
            }
            Ok(LogRecord {
                user_id: row[0].to_owned(),
                timestamp,
                product_id: row[2].to_owned(),
                purchased,
                user_features: floats(&user_cols)?,
                product_features: floats(&product_cols)?,
            })
        })();
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => {
                warn!("log line {line}: {message}");
                out.skipped.push(RowError { line, message });
            }
        }
    }
    Ok(out)
}

pub fn read_log_file(path: impl AsRef<Path>) -> Result<ParsedLog> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_log(std::io::BufReader::new(file))
}

/// Writes records with the header implied by the first record's features.
pub fn write_log<W: Write>(writer: W, records: &[LogRecord]) -> Result<()> {
    let user_dim = records
        .first()
        .and_then(|r| r.user_features.as_ref())
        .map_or(0, Vec::len);
    let product_dim = records
        .first()
        .and_then(|r| r.product_features.as_ref())
        .map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["user_id", "timestamp", "product_id", "purchased"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=user_dim).map(|i| format!("f_u_{i}")));
    header.extend((1..=product_dim).map(|i| format!("f_p_{i}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.user_id.clone(),
            r.timestamp.to_string(),
            r.product_id.clone(),
            u8::from(r.purchased).to_string(),
        ];
        for (dim, feats) in [
            (user_dim, &r.user_features),
            (product_dim, &r.product_features),
        ] {
            let feats = feats.as_deref().unwrap_or(&[]);
            if feats.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: feats.len(),
                });
            }
            row.extend(feats.iter().map(|v| format!("{v:e}")));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<log writer>", e))?;
    Ok(())
}

/// Log records produced by one simulated session: one record per viewed
/// product, `spacing` seconds apart starting at `start`.
#[allow(clippy::too_many_arguments)]
pub fn records_for_session(
    user_id: &str,
    start: i64,
    spacing: i64,
    policy: &RankingPolicy,
    outcome: &SessionOutcome,
    product_ids: &[String],
    user_features: Option<&[f64]>,
    product_features: Option<&[Vec<f64>]>,
) -> Vec<LogRecord> {
    (0..outcome.viewed())
        .map(|k| {
            let product = policy.product_at(k);
            LogRecord {
                user_id: user_id.to_owned(),
                timestamp: start + spacing * k as i64,
                product_id: product_ids[product].clone(),
                purchased: outcome.purchased(k),
                user_features: user_features.map(<[f64]>::to_vec),
                product_features: product_features.map(|p| p[product].clone()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub user_id: String,
    pub records: Vec<LogRecord>,
}

fn record_order(a: &LogRecord, b: &LogRecord) -> std::cmp::Ordering {
    a.timestamp
        .cmp(&b.timestamp)
        .then_with(|| a.product_id.cmp(&b.product_id))
        .then_with(|| a.purchased.cmp(&b.purchased))
}

/// Groups records per user, sorts them in time and starts a new session
/// whenever the gap to the previous record is strictly larger than
/// `gap_seconds`. Output is ordered by user, then time.
pub fn sessionize(records: &[LogRecord], gap_seconds: i64) -> Vec<Session> {
    let mut by_user: BTreeMap<&str, Vec<&LogRecord>> = BTreeMap::new();
    for r in records {
        by_user.entry(&r.user_id).or_default().push(r);
    }
    let mut sessions = Vec::new();
    for (user, mut recs) in by_user {
        recs.sort_by(|a, b| record_order(a, b));
        let mut current: Vec<LogRecord> = Vec::new();
        for r in recs {
            if let Some(prev) = current.last() {
                if r.timestamp - prev.timestamp > gap_seconds {
                    sessions.push(Session {
                        user_id: user.to_owned(),
                        records: std::mem::take(&mut current),
                    });
                }
            }
            current.push(r.clone());
        }
        if !current.is_empty() {
            sessions.push(Session {
                user_id: user.to_owned(),
                records: current,
            });
        }
    }
    sessions
}

/// Counts behind the non-contextual estimates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub sessions: u64,
    pub records: u64,
    pub skip_events: u64,
    pub skip_continues: u64,
    pub buy_events: u64,
    pub buy_continues: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonContextualEstimate {
    pub product_ids: Vec<String>,
    pub views: Vec<u64>,
    pub buys: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub q: f64,
    pub s: f64,
    pub counts: IngestCounts,
}

/// Rebuilds the counting statistics from sessions. Every record is a view;
/// whether another record follows in the same session is its continuation
/// indicator, so the last record of a session counts as a departure.
pub fn estimate_noncontextual(sessions: &[Session]) -> Result<NonContextualEstimate> {
    if sessions.is_empty() {
        return Err(invalid("no sessions to estimate from"));
    }
    let mut per_product: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    let mut counts = IngestCounts {
        sessions: sessions.len() as u64,
        ..Default::default()
    };
    for session in sessions {
        let last = session.records.len().saturating_sub(1);
        for (i, r) in session.records.iter().enumerate() {
            let entry = per_product.entry(&r.product_id).or_default();
            entry.0 += 1;
            counts.records += 1;
            let go_on = u64::from(i < last);
            if r.purchased {
                entry.1 += 1;
                counts.buy_events += 1;
                counts.buy_continues += go_on;
            } else {
                counts.skip_events += 1;
                counts.skip_continues += go_on;
            }
        }
    }
    let q = match counts.skip_events {
        0 => 0.0,
        n => counts.skip_continues as f64 / n as f64,
    };
    let w = match counts.buy_events {
        0 => 0.0,
        n => counts.buy_continues as f64 / n as f64,
    };
    let s = if q > 0.0 {
        (w / q).min(1.0)
    } else if w > 0.0 {
        return Err(Error::Inconsistent(format!(
            "no continuation after skips but {w} after purchases"
        )));
    } else {
        0.0
    };
    let (product_ids, (views, buys)): (Vec<String>, (Vec<u64>, Vec<u64>)) = per_product
        .iter()
        .map(|(id, &(v, b))| (id.to_string(), (v, b)))
        .unzip();
    let lambdas = views
        .iter()
        .zip(&buys)
        .map(|(&v, &b)| b as f64 / v as f64)
        .collect();
    Ok(NonContextualEstimate {
        product_ids,
        views,
        buys,
        lambdas,
        q,
        s,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualEstimate {
    pub beta_lambda: Vec<f64>,
    pub beta_q: Vec<f64>,
    pub beta_w: Vec<f64>,
    pub beta_s: Vec<f64>,
    pub counts: IngestCounts,
    pub warnings: Vec<String>,
}

/// Ridge estimates of the linear coefficients from sessions whose records
/// carry user and product features.
pub fn estimate_contextual(
    sessions: &[Session],
    ridge_strength: f64,
) -> Result<ContextualEstimate> {
    let first = sessions.iter().flat_map(|s| &s.records).next();
    let (m_x, m_p) = match first {
        Some(r) => (
            r.user_features.as_ref().map_or(0, Vec::len),
            r.product_features.as_ref().map_or(0, Vec::len),
        ),
        None => (0, 0),
    };
    if first.is_some() && (m_x == 0 || m_p == 0) {
        return Err(invalid(
            "contextual estimation needs user and product features",
        ));
    }
    let (m_x, m_p) = if first.is_none() { (1, 1) } else { (m_x, m_p) };
    let mut lambda = RidgeState::new(m_x + m_p, ridge_strength)?;
    let mut q = RidgeState::new(m_x, ridge_strength)?;
    let mut w = RidgeState::new(m_x * m_x, ridge_strength)?;
    let mut counts = IngestCounts {
        sessions: sessions.len() as u64,
        ..Default::default()
    };
    for session in sessions {
        let last = session.records.len().saturating_sub(1);
        for (i, r) in session.records.iter().enumerate() {
            let (Some(x), Some(p)) = (&r.user_features, &r.product_features) else {
                return Err(invalid(format!(
                    "record of user {} lacks features",
                    r.user_id
                )));
            };
            if x.len() != m_x || p.len() != m_p {
                return Err(Error::Dimension {
                    expected: m_x + m_p,
                    got: x.len() + p.len(),
                });
            }
            counts.records += 1;
            lambda.update(&joint_feature(x, p), r.purchased)?;
            let go_on = i < last;
            if r.purchased {
                counts.buy_events += 1;
                counts.buy_continues += u64::from(go_on);
                w.update(&outer_vec(x), go_on)?;
            } else {
                counts.skip_events += 1;
                counts.skip_continues += u64::from(go_on);
                q.update(x, go_on)?;
            }
        }
    }
    let mut warnings = Vec::new();
    for (name, events, dim) in [
        ("purchase", counts.records, lambda.dim()),
        ("skip", counts.skip_events, q.dim()),
        ("post-purchase", counts.buy_events, w.dim()),
    ] {
        if (events as usize) < dim {
            let msg = format!(
                "only {events} {name} events for {dim} coefficients; estimate is prior-dominated"
            );
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    let beta_lambda = lambda.solve_beta()?;
    let beta_q = q.solve_beta()?;
    let beta_w = w.solve_beta()?;
    let beta_s = factor_rank_one(&beta_w, &beta_q)?;
    Ok(ContextualEstimate {
        beta_lambda,
        beta_q,
        beta_w,
        beta_s,
        counts,
        warnings,
    })
}

/// A product available for sampling into an experiment catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCandidate {
    pub id: String,
    pub price: f64,
    pub lambda: f64,
}

/// Reads a `product_id,price` CSV.
pub fn read_price_list(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut prices = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let price: f64 = row
            .get(1)
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                message: format!("bad price row {:?}", row.iter().collect::<Vec<_>>()),
            })?;
        prices.insert(row[0].to_owned(), price);
    }
    Ok(prices)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredProducts {
    pub ids: Vec<String>,
    pub catalog: ProductCatalog,
    pub lambdas: Vec<f64>,
}

/// Keeps products with `price <= max_price` and `lambda >= min_lambda`, then
/// samples `sample_n` of them uniformly without replacement.
pub fn filter_products<R: Rng + ?Sized>(
    candidates: &[ProductCandidate],
    max_price: f64,
    min_lambda: f64,
    sample_n: usize,
    rng: &mut R,
) -> Result<FilteredProducts> {
    let eligible: Vec<&ProductCandidate> = candidates
        .iter()
        .filter(|c| c.price <= max_price && c.lambda >= min_lambda)
        .collect();
    if eligible.len() < sample_n || sample_n == 0 {
        return Err(Error::NotEnoughProducts {
            eligible: eligible.len(),
            requested: sample_n,
        });
    }
    let chosen: Vec<&ProductCandidate> = if eligible.len() == sample_n {
        eligible
    } else {
        let mut idx = sample(rng, eligible.len(), sample_n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| eligible[i]).collect()
    };
    Ok(FilteredProducts {
        ids: chosen.iter().map(|c| c.id.clone()).collect(),
        catalog: ProductCatalog::new(chosen.iter().map(|c| c.price).collect())?,
        lambdas: chosen.iter().map(|c| c.lambda).collect(),
    })
}

/// JSON document emitted by the `ingest` command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterReport {
    pub product_ids: Vec<String>,
    pub lambdas: Vec<f64>,
    pub q: Option<f64>,
    pub s: Option<f64>,
    pub beta_lambda: Option<Vec<f64>>,
    pub beta_q: Option<Vec<f64>>,
    pub beta_s: Option<Vec<f64>>,
    pub counts: IngestCounts,
    pub skipped_rows: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(user: &str, t: i64, product: &str, bought: bool) -> LogRecord {
        LogRecord {
            user_id: user.into(),
            timestamp: t,
            product_id: product.into(),
            purchased: bought,
            user_features: None,
            product_features: None,
        }
    }

    fn times(s: &Session) -> Vec<i64> {
        s.records.iter().map(|r| r.timestamp).collect()
    }

    #[test]
    fn ten_minute_rule() {
        let recs = [
            rec("u", 0, "a", false),
            rec("u", 300, "b", false),
            rec("u", 1200, "c", true),
        ];
        let s = sessionize(&recs, DEFAULT_SESSION_GAP_SECONDS);
        assert_eq!(s.len(), 2);
        assert_eq!(times(&s[0]), vec![0, 300]);
        assert_eq!(times(&s[1]), vec![1200]);
    }

    #[test]
    fn gap_boundary() {
        let same = sessionize(&[rec("u", 0, "a", false), rec("u", 600, "b", false)], 600);
        assert_eq!(same.len(), 1);
        let split = sessionize(&[rec("u", 0, "a", false), rec("u", 601, "b", false)], 600);
        assert_eq!(split.len(), 2);
    }

    #[test]
    fn singleton_and_users_separate() {
        let s = sessionize(&[rec("u", 5, "a", false)], 600);
        assert_eq!(s.len(), 1);
        let s = sessionize(&[rec("v", 0, "a", false), rec("u", 10, "a", false)], 600);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].user_id, "u");
    }

    #[test]
    fn order_independent_and_idempotent() {
        let recs = vec![
            rec("u", 900, "c", true),
            rec("v", 10, "a", false),
            rec("u", 0, "a", false),
            rec("u", 100, "b", false),
            rec("v", 5000, "b", true),
        ];
        let a = sessionize(&recs, 600);
        let mut rev = recs.clone();
        rev.reverse();
        assert_eq!(a, sessionize(&rev, 600));
        let flat: Vec<LogRecord> = a.iter().flat_map(|s| s.records.clone()).collect();
        assert_eq!(a, sessionize(&flat, 600));
    }

    #[test]
    fn single_views_without_purchase_give_zero_q() {
        let sessions = sessionize(&[rec("u", 0, "a", false), rec("u", 5000, "b", false)], 600);
        let e = estimate_noncontextual(&sessions).unwrap();
        assert_eq!(e.q, 0.0);
        assert_eq!(e.s, 0.0);
        assert_eq!(e.lambdas, vec![0.0, 0.0]);
    }

    #[test]
    fn continuation_after_purchase_only_is_inconsistent() {
        let sessions = sessionize(&[rec("u", 0, "a", true), rec("u", 60, "b", false)], 600);
        assert!(matches!(
            estimate_noncontextual(&sessions),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn csv_round_trip_and_bad_rows() {
        let text = "user_id,timestamp,product_id,purchased,f_u_1,f_p_1\n\
                    u1,0,p1,1,0.5,0.25\n\
                    u1,abc,p2,0,0.5,0.1\n\
                    u2,10,p2,maybe,0.1,0.1\n\
                    u2,20,p3,0,0.1\n\
                    u3,30,p1,0,0.3,0.2\n";
        let parsed = read_log(text.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(
            parsed.skipped.iter().map(|e| e.line).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
        assert_eq!(parsed.user_dim, 1);
        let mut buf = Vec::new();
        write_log(&mut buf, &parsed.records).unwrap();
        let again = read_log(buf.as_slice()).unwrap();
        assert_eq!(again.records, parsed.records);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_log("user,timestamp,product_id,purchased\n".as_bytes()).is_err());
        assert!(read_log("user_id,timestamp,product_id,purchased,price\n".as_bytes()).is_err());
    }

    fn candidates() -> Vec<ProductCandidate> {
        vec![
            ProductCandidate {
                id: "a".into(),
                price: 250.0,
                lambda: 0.5,
            },
            ProductCandidate {
                id: "b".into(),
                price: 100.0,
                lambda: 0.05,
            },
            ProductCandidate {
                id: "c".into(),
                price: 200.0,
                lambda: 0.1,
            },
            ProductCandidate {
                id: "d".into(),
                price: 50.0,
                lambda: 0.3,
            },
        ]
    }

    #[test]
    fn filter_thresholds() {
        let mut rng = crate::sim::consumer_rng(1, 0, 0);
        let f = filter_products(&candidates(), 200.0, 0.1, 2, &mut rng).unwrap();
        assert_eq!(f.ids, vec!["c", "d"]);
        assert_eq!(f.catalog.revenues(), &[200.0, 50.0]);
        let err = filter_products(&candidates(), 200.0, 0.1, 3, &mut rng).unwrap_err();
        assert!(matches!(
            err,
            Error::NotEnoughProducts {
                eligible: 2,
                requested: 3
            }
        ));
        let one = filter_products(&candidates(), 200.0, 0.1, 1, &mut rng).unwrap();
        assert!(one.ids == vec!["c"] || one.ids == vec!["d"]);
    }

    #[test]
    fn no_events_contextual_is_zero() {
        let e = estimate_contextual(&[], 1.0).unwrap();
        assert!(e.beta_q.iter().all(|b| *b == 0.0));
        assert!(e.beta_lambda.iter().all(|b| *b == 0.0));
    }
}
