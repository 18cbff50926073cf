use mpb_core::contextual::{
    confidence_radius, contextual_mpb_ucb_step, contextual_optimistic_estimates, dot, outer_vec,
    outer_vec2, ContextualParams, ContextualState, RidgeState,
};
use mpb_core::harness::generate_contextual_stream;
use mpb_core::sim::SimRng;
use mpb_core::{GlobalConfig, ProductCatalog};
use rand::{Rng, SeedableRng};

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn batch(features: &[Vec<f64>], responses: &[bool], alpha: f64) -> Vec<f64> {
    let d = features[0].len();
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = alpha;
    }
    for (f, &r) in features.iter().zip(responses) {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += f[i] * f[j];
            }
            if r {
                b[i] += f[i];
            }
        }
    }
    solve(a, b)
}

#[test]
fn incremental_equals_batch_on_every_prefix() {
    let mut rng = SimRng::seed_from_u64(17);
    let d = 6;
    let mut state = RidgeState::new(d, 0.5).unwrap();
    let mut feats = Vec::new();
    let mut resp = Vec::new();
    for _ in 0..500 {
        let mut f: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = dot(&f, &f).sqrt();
        f.iter_mut().for_each(|v| *v /= n.max(1.0));
        let r = rng.random_bool(0.4);
        state.update(&f, r).unwrap();
        feats.push(f);
        resp.push(r);
        let inc = state.solve_beta().unwrap();
        let want = batch(&feats, &resp, 0.5);
        let scale = dot(&want, &want).sqrt().max(1e-300);
        let err = inc
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err / scale <= 1e-8, "relative error {}", err / scale);
    }
}

#[test]
fn vectorization_identity() {
    let mut rng = SimRng::seed_from_u64(3);
    for _ in 0..1000 {
        let m = rng.random_range(1..6);
        let x: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let bq: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let bs: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let lhs = dot(&outer_vec(&x), &outer_vec2(&bq, &bs));
        let rhs = dot(&x, &bq) * dot(&x, &bs);
        assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1.0));
    }
}

#[test]
fn radius_nondecreasing_in_t() {
    let mut rng = SimRng::seed_from_u64(4);
    for _ in 0..100 {
        let m = rng.random_range(1..30);
        let alpha = rng.random_range(0.01..10.0);
        let n = rng.random_range(1..100);
        let u = rng.random_range(0.0..3.0);
        let t = rng.random_range(1..100_000);
        assert!(confidence_radius(t + 1, m, alpha, n, u) >= confidence_radius(t, m, alpha, n, u));
    }
}

/// Attention-coefficient estimate stays inside its confidence ellipsoid.
#[test]
fn attention_estimate_coverage() {
    let (n, m_x, t_end, reps) = (8, 3, 100u64, 500u64);
    let config = GlobalConfig::default();
    let mut misses = 0u64;
    for rep in 0..reps {
        let mut rng = SimRng::seed_from_u64(1000 + rep);
        let stream =
            generate_contextual_stream(n, m_x, t_end as usize, 0.3, 0.9, 0.5, &mut rng).unwrap();
        let catalog = ProductCatalog::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
        let params = ContextualParams {
            u_bound: stream.coefficients.u_bound(),
            ..Default::default()
        };
        let mut state = ContextualState::new(m_x, 2 * m_x, n, &params).unwrap();
        for t in 0..t_end as usize {
            let f = stream.features(t);
            contextual_mpb_ucb_step(
                &mut state,
                &f,
                &catalog,
                &params,
                &config,
                &stream.coefficients,
                &mut rng,
            )
            .unwrap();
            let est = contextual_optimistic_estimates(&state, &f, &params, &config, None).unwrap();
            assert!(est.lambda_ucb.iter().all(|l| (0.0..=1.0).contains(l)));
            assert!((0.0..=config.q_cap()).contains(&est.q_ucb));
            assert!(est.w_ucb >= 0.0 && est.w_ucb <= est.q_ucb);
        }
        let fit = state.q.fit().unwrap();
        let err = fit.sigma_norm_of_error(&stream.coefficients.beta_q);
        let tau = confidence_radius(t_end, m_x, params.alpha_q, n, params.u_bound);
        if err > tau {
            misses += 1;
        }
    }
    let bound = 3.0 / (t_end as f64).powi(2);
    let slack = 3.0 * (bound * (1.0 - bound) / reps as f64).sqrt();
    assert!(
        misses as f64 / reps as f64 <= bound + slack,
        "{misses} misses"
    );
}
