use mpb_core::harness::generate_contextual_stream;
use mpb_core::ingest::{
    estimate_contextual, estimate_noncontextual, read_log, records_for_session, sessionize,
    write_log, LogRecord, DEFAULT_SESSION_GAP_SECONDS,
};
use mpb_core::revenue::optimal_ranking;
use mpb_core::sim::{consumer_rng, simulate_session, SimRng};
use mpb_core::{ConsumerProfile, GlobalConfig, ProductCatalog, RankingPolicy};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn ids(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("item{k}")).collect()
}

#[test]
fn noncontextual_parameters_survive_a_csv_round_trip() {
    let n = 30;
    let mut rng = SimRng::seed_from_u64(2);
    let profile = ConsumerProfile::new(
        (0..n).map(|_| rng.random_range(0.1..0.3)).collect(),
        0.9,
        0.5,
        0.05,
    )
    .unwrap();
    let product_ids = ids(n);
    let mut records = Vec::new();
    for i in 0..20_000u64 {
        let mut r = consumer_rng(5, 1, i);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let policy = RankingPolicy::new(order).unwrap();
        let outcome = simulate_session(&profile, &policy, &mut r);
        // two sessions per user, an hour apart
        let user = format!("u{}", i / 2);
        records.extend(records_for_session(
            &user,
            (i % 2) as i64 * 3600,
            30,
            &policy,
            &outcome,
            &product_ids,
            None,
            None,
        ));
    }
    let mut buf = Vec::new();
    write_log(&mut buf, &records).unwrap();
    let parsed = read_log(buf.as_slice()).unwrap();
    assert!(parsed.skipped.is_empty());
    let sessions = sessionize(&parsed.records, DEFAULT_SESSION_GAP_SECONDS);
    assert_eq!(sessions.len(), 20_000);
    let est = estimate_noncontextual(&sessions).unwrap();
    assert!((est.q - 0.9).abs() < 0.01, "q = {}", est.q);
    assert!((est.s - 0.5).abs() < 0.03, "s = {}", est.s);
    for (k, id) in est.product_ids.iter().enumerate() {
        let truth = profile.lambda(product_ids.iter().position(|p| p == id).unwrap());
        let se = (truth * (1.0 - truth) / est.views[k] as f64).sqrt();
        assert!((est.lambdas[k] - truth).abs() < 5.0 * se, "{id}");
    }
}

#[test]
fn contextual_coefficients_recovered() {
    let (n, m_x, t) = (10, 2, 20_000);
    let mut rng = SimRng::seed_from_u64(8);
    let stream = generate_contextual_stream(n, m_x, t, 0.3, 0.9, 0.5, &mut rng).unwrap();
    let catalog = ProductCatalog::new(vec![1.0; n]).unwrap();
    let config = GlobalConfig::default();
    let product_ids = ids(n);
    let mut records: Vec<LogRecord> = Vec::new();
    for i in 0..t {
        let f = stream.features(i);
        let profile = stream.coefficients.profile_for(&f, &config);
        let policy = optimal_ranking(&profile, &catalog).unwrap();
        let outcome = simulate_session(&profile, &policy, &mut rng);
        records.extend(records_for_session(
            &format!("u{i}"),
            0,
            10,
            &policy,
            &outcome,
            &product_ids,
            Some(f.x()),
            Some(&stream.product_features),
        ));
    }
    let sessions = sessionize(&records, DEFAULT_SESSION_GAP_SECONDS);
    let est = estimate_contextual(&sessions, 1.0).unwrap();
    // Predicted attention and purchase probabilities match the truth on the
    // observed population even where individual coefficients are weakly
    // identified.
    let dot = mpb_core::contextual::dot;
    for i in (0..t).step_by(997) {
        let f = stream.features(i);
        let q_true = dot(f.x(), &stream.coefficients.beta_q);
        assert!((dot(f.x(), &est.beta_q) - q_true).abs() < 0.02);
        let w_true = q_true * dot(f.x(), &stream.coefficients.beta_s);
        let w_hat = dot(&mpb_core::contextual::outer_vec(f.x()), &est.beta_w);
        assert!((w_hat - w_true).abs() < 0.05, "{w_hat} vs {w_true}");
        for k in 0..n {
            let l_true = dot(f.y(k), &stream.coefficients.beta_lambda);
            assert!((dot(f.y(k), &est.beta_lambda) - l_true).abs() < 0.05);
        }
    }
    assert!(est.warnings.is_empty());
}
