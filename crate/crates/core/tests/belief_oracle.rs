//! Kalman updates against brute-force Bayes on a grid.

mod common;

use common::grid_posterior;
use mineral_pomdp::belief::{kalman_update, repeated_update_variance};
use mineral_pomdp::{Action, Belief, GaussianBelief, Observables, Observation, ProblemConfig};
use proptest::prelude::*;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

#[test]
fn kalman_matches_grid_bayes_on_random_cases() {
    let mut rng = SmallRng::seed_from_u64(7);
    for case in 0..100 {
        let mu: f64 = rng.random_range(0.0..200_000.0);
        let sigma: f64 = rng.random_range(500.0..20_000.0);
        let sigma_o: f64 = rng.random_range(500.0..20_000.0);
        let spread = (sigma * sigma + sigma_o * sigma_o).sqrt();
        let reading = (mu + rng.random_range(-3.0..3.0f64) * spread).max(0.0);
        let (m, s) = kalman_update(mu, sigma, sigma_o, reading);
        let (gm, gv) = grid_posterior(mu, sigma, sigma_o, reading);
        assert!((m - gm).abs() < 0.1, "case {case}: mean {m} vs {gm}");
        assert!(((s * s - gv) / gv).abs() < 1e-3, "case {case}: var {} vs {gv}", s * s);
    }
}

#[test]
fn repeated_updates_follow_the_closed_form() {
    for &(s0, so) in &[(10_000.0f64, 6000.0f64), (500.0, 20_000.0), (3000.0, 3000.0)] {
        let (mut m, mut s) = (50_000.0f64, s0);
        for k in 1..=30u32 {
            (m, s) = kalman_update(m, s, so, 40_000.0);
            let expect = s0 * s0 * so * so / (so * so + k as f64 * s0 * s0);
            assert!(((s * s - expect) / expect).abs() < 1e-9, "k={k}");
            let closed = repeated_update_variance(s0, so, k);
            assert!(((closed - expect) / expect).abs() < 1e-12);
        }
        assert!(m.is_finite());
    }
}

#[test]
fn single_precision_belief_tracks_double() {
    let obs = Observables::initial(1);
    let b64 = GaussianBelief::new(vec![100_000.0f64], vec![10_000.0], obs.clone()).unwrap();
    let b32 = GaussianBelief::new(vec![100_000.0f32], vec![10_000.0], obs.clone()).unwrap();
    let o = Observation::from_sentinel(&[112_000.0]);
    let a = b64.update_with(Action::Explore(0), &o, &obs, 6000.0, &[0.0]).unwrap();
    let b = b32.update_with(Action::Explore(0), &o, &obs, 6000.0, &[0.0]).unwrap();
    assert!((a.mean[0] - b.mean[0] as f64).abs() < 0.1);
    assert!((a.std[0] - b.std[0] as f64).abs() < 0.01);
}

/// Belief after `k` noisy readings of a fixed truth, replayed many times:
/// the truth's z-score under the posterior should be standard normal.
#[test]
fn posterior_is_calibrated() {
    let config = ProblemConfig::table1();
    let mut rng = SmallRng::seed_from_u64(11);
    let so = config.obs_noise;
    let prior = Belief::prior(&config);
    let mut zs = Vec::new();
    for _ in 0..4000 {
        let truth = prior.mean[0] + prior.std[0] * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let (mut m, mut s) = (prior.mean[0], prior.std[0]);
        for _ in 0..3 {
            let reading = truth + so * rng.sample::<f64, _>(rand_distr::StandardNormal);
            (m, s) = kalman_update(m, s, so, reading);
        }
        zs.push((truth - m) / s);
    }
    let n = zs.len() as f64;
    let mean = zs.iter().sum::<f64>() / n;
    let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let inside = zs.iter().filter(|z| z.abs() < 1.96).count() as f64 / n;
    assert!(mean.abs() < 0.06, "mean z {mean}");
    assert!((var - 1.0).abs() < 0.08, "var z {var}");
    assert!((inside - 0.95).abs() < 0.015, "coverage {inside}");
}

proptest! {
    #[test]
    fn update_never_widens_and_stays_between(
        mu in 0.0..1e6f64,
        sigma in 0.0..5e4f64,
        sigma_o in 1.0..5e4f64,
        reading in 0.0..1e6f64,
    ) {
        let (m, s) = kalman_update(mu, sigma, sigma_o, reading);
        prop_assert!(s <= sigma + 1e-9);
        prop_assert!(m >= mu.min(reading) - 1e-6 && m <= mu.max(reading) + 1e-6);
    }
}
