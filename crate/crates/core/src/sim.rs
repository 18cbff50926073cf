//! Sampling of browsing sessions under the multiple-purchase choice model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{invalid, Result};
use crate::model::{ConsumerProfile, RankingPolicy, SessionOutcome};

/// Generator used everywhere in the crate.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Independent stream for consumer `consumer` of replication `run`.
pub fn consumer_rng(seed: u64, run: u64, consumer: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, run));
    rng.set_stream(consumer);
    rng
}

/// Attention span and purchase budget drawn up front.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionDraw {
    pub v: u64,
    pub b: u64,
}

/// Draws `k >= 1` with `P(k) = p^(k-1) (1 - p)`.
pub fn sample_geometric<R: Rng + ?Sized>(continue_prob: f64, rng: &mut R) -> Result<u64> {
    if !(0.0..1.0).contains(&continue_prob) {
        return Err(invalid(format!(
            "continuation probability must lie in [0,1), got {continue_prob}"
        )));
    }
    if continue_prob == 0.0 {
        return Ok(1);
    }
    // rand_distr counts failures before the first success.
    let failures = Geometric::new(1.0 - continue_prob)
        .map_err(|e| invalid(e.to_string()))?
        .sample(rng);
    Ok(failures.saturating_add(1))
}

/// Whether the continuation draw at the final list position is recorded.
/// The consumer draws it before noticing the list is exhausted, so the
/// simulator keeps it.
pub const RECORD_END_OF_LIST_CONTINUATION: bool = true;

/// Simulates one consumer walking down `policy`.
///
/// At each viewed position the purchase is drawn with the product's purchase
/// probability, then the continuation with probability `q` after a skip or
/// `q s` after a purchase. Browsing stops on a failed continuation or at the
/// end of the list.
pub fn simulate_session<R: Rng + ?Sized>(
    profile: &ConsumerProfile,
    policy: &RankingPolicy,
    rng: &mut R,
) -> SessionOutcome {
    let n = policy.len();
    let (q, w) = (profile.q(), profile.w());
    let mut purchases = Vec::new();
    let mut continuation = Vec::new();
    for k in 0..n {
        let bought = rng.random_bool(profile.lambda(policy.product_at(k)));
        let go_on = rng.random_bool(if bought { w } else { q });
        purchases.push(bought);
        if k + 1 == n {
            continuation.push(RECORD_END_OF_LIST_CONTINUATION.then_some(go_on));
            break;
        }
        continuation.push(Some(go_on));
        if !go_on {
            break;
        }
    }
    SessionOutcome::new(purchases, continuation).expect("simulator emits consistent traces")
}

/// Draws span and budget for one consumer.
pub fn sample_session_draw<R: Rng + ?Sized>(profile: &ConsumerProfile, rng: &mut R) -> SessionDraw {
    SessionDraw {
        v: sample_geometric(profile.q(), rng).expect("profile q < 1"),
        // s = 1 means the budget never binds.
        b: sample_geometric(profile.s(), rng).unwrap_or(u64::MAX),
    }
}

/// Simulates a session from a pre-sampled span and budget: views up to `v`
/// products, stopping early once `b` purchases are made. Continuations are
/// not observable in this form, so the last one is `None`.
pub fn simulate_with_draw<R: Rng + ?Sized>(
    profile: &ConsumerProfile,
    policy: &RankingPolicy,
    draw: SessionDraw,
    rng: &mut R,
) -> SessionOutcome {
    let limit = usize::try_from(draw.v)
        .unwrap_or(usize::MAX)
        .min(policy.len());
    let mut purchases = Vec::with_capacity(limit);
    let mut bought_total = 0u64;
    for k in 0..limit {
        let bought = rng.random_bool(profile.lambda(policy.product_at(k)));
        purchases.push(bought);
        if bought {
            bought_total += 1;
            if bought_total >= draw.b {
                break;
            }
        }
    }
    let mut continuation = vec![Some(true); purchases.len()];
    *continuation.last_mut().expect("at least one view") = None;
    SessionOutcome::new(purchases, continuation).expect("consistent trace")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    #[test]
    fn geometric_zero_is_one() {
        let mut r = rng(1);
        for _ in 0..1000 {
            assert_eq!(sample_geometric(0.0, &mut r).unwrap(), 1);
        }
    }

    #[test]
    fn geometric_rejects_one() {
        assert!(sample_geometric(1.0, &mut rng(1)).is_err());
        assert!(sample_geometric(-0.1, &mut rng(1)).is_err());
        assert!(sample_geometric(f64::NAN, &mut rng(1)).is_err());
    }

    #[test]
    fn geometric_first_mass_at_09() {
        let mut r = rng(2);
        let n = 1_000_000;
        let ones = (0..n)
            .filter(|_| sample_geometric(0.9, &mut r).unwrap() == 1)
            .count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.1).abs() < 0.001, "{freq}");
    }

    #[test]
    fn geometric_mean_at_half() {
        let mut r = rng(3);
        let n = 1_000_000;
        let sum: u64 = (0..n).map(|_| sample_geometric(0.5, &mut r).unwrap()).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 2.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn no_attention_stops_after_first_view() {
        let p = ConsumerProfile::new(vec![0.0; 6], 0.0, 0.5, 0.05).unwrap();
        let pol = RankingPolicy::identity(6);
        let mut r = rng(4);
        for _ in 0..100 {
            let o = simulate_session(&p, &pol, &mut r);
            assert_eq!(o.viewed(), 1);
            assert_eq!(o.purchases(), &[false]);
            assert_eq!(o.eta(0), Some(false));
        }
    }

    #[test]
    fn end_of_list_continuation_recorded() {
        let p = ConsumerProfile::new(vec![0.0; 2], 0.95, 0.5, 0.05).unwrap();
        let pol = RankingPolicy::identity(2);
        let mut r = rng(5);
        let full = (0..1000)
            .map(|_| simulate_session(&p, &pol, &mut r))
            .find(|o| o.viewed() == 2)
            .expect("some session reaches the end");
        assert!(full.eta(1).is_some());
    }

    #[test]
    fn presampled_respects_budget() {
        let p = ConsumerProfile::new(vec![1.0; 8], 0.9, 0.5, 0.05).unwrap();
        let pol = RankingPolicy::identity(8);
        let mut r = rng(6);
        let o = simulate_with_draw(&p, &pol, SessionDraw { v: 6, b: 3 }, &mut r);
        assert_eq!(o.viewed(), 3);
        assert_eq!(o.purchase_count(), 3);
        let o = simulate_with_draw(&p, &pol, SessionDraw { v: 2, b: 3 }, &mut r);
        assert_eq!(o.viewed(), 2);
    }

    #[test]
    fn consumer_streams_are_reproducible_and_distinct() {
        let a: u64 = consumer_rng(9, 0, 5).random();
        let b: u64 = consumer_rng(9, 0, 5).random();
        let c: u64 = consumer_rng(9, 0, 6).random();
        let d: u64 = consumer_rng(9, 1, 5).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
