//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use mineral_pomdp::{Action, Dist, ProblemConfig, StepOutcome};
use rand::rngs::SmallRng;
use rand::Rng;

/// Posterior mean and variance of a Gaussian prior times a Gaussian
/// likelihood, by summation over a uniform grid.
pub fn grid_posterior(mu: f64, sigma: f64, sigma_o: f64, reading: f64) -> (f64, f64) {
    let spread = 12.0 * sigma.max(sigma_o);
    let lo = mu.min(reading) - spread;
    let hi = mu.max(reading) + spread;
    let n = 400_000;
    let h = (hi - lo) / n as f64;
    let logw: Vec<f64> = (0..=n)
        .map(|i| {
            let v = lo + i as f64 * h;
            -0.5 * ((v - mu) / sigma).powi(2) - 0.5 * ((reading - v) / sigma_o).powi(2)
        })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (i, lw) in logw.iter().enumerate() {
        let v = lo + i as f64 * h;
        let w = (lw - top).exp();
        z += w;
        m1 += w * v;
        m2 += w * v * v;
    }
    let mean = m1 / z;
    (mean, m2 / z - mean * mean)
}

/// Every violated invariant of one step, as messages.
pub fn violations(out: &StepOutcome, config: &ProblemConfig) -> Vec<String> {
    let mut bad = Vec::new();
    let (s, x) = (&out.state, &out.next_state);
    let w = config.weights;
    let r = &out.reward_parts;
    for j in 0..s.n_sites() {
        if x.reserves[j] < 0.0 {
            bad.push(format!("site {j}: negative reserve {}", x.reserves[j]));
        }
        if x.reserves[j] + out.extracted[j] != s.reserves[j] {
            bad.push(format!("site {j}: mass not conserved"));
        }
        if !s.operating[j] && out.extracted[j] != 0.0 {
            bad.push(format!("site {j}: extraction while idle"));
        }
        if out.losses[j] < 0.0 || out.losses[j] > out.extracted[j] {
            bad.push(format!("site {j}: loss {} outside [0, E]", out.losses[j]));
        }
        let expect = if config.has_loss(j) {
            out.extracted[j] - out.losses[j]
        } else {
            out.extracted[j]
        };
        if out.delivered[j] != expect {
            bad.push(format!("site {j}: delivered {} != {expect}", out.delivered[j]));
        }
    }
    let delivered: f64 = out.delivered.iter().sum();
    if (out.feed - delivered).abs() > 1e-9 {
        bad.push("feed differs from total delivery".into());
    }
    let gained = (x.domestic - s.domestic) + (x.imported - s.imported);
    if (gained - delivered).abs() > 1e-6 {
        bad.push(format!("accounted mass {gained} != delivered {delivered}"));
    }
    let total = -w[0] * r.r1_domestic_penalty - w[1] * r.r2_emissions - w[2] * r.r3_unfulfilled
        + w[3] * r.r4_profit;
    if (total - out.reward_total).abs() > 1e-9 * total.abs().max(1.0) {
        bad.push(format!("reward {} != weighted sum {total}", out.reward_total));
    }
    if (r.r4_profit - (r.revenue - r.cost)).abs() > 1e-9 * r.cost.abs().max(1.0) {
        bad.push("profit != revenue - cost".into());
    }
    if r.r3_unfulfilled < 0.0 || r.r1_domestic_penalty < 0.0 {
        bad.push("negative penalty".into());
    }
    match out.action {
        Action::Explore(j) => match out.observation.measured_site() {
            Some((site, v)) if site == j => {
                if v < 0.0 || (v / config.obs_bin).fract() != 0.0 {
                    bad.push(format!("reading {v} not a non-negative bin"));
                }
                if out.observation.readings().iter().flatten().count() != 1 {
                    bad.push("explore produced several readings".into());
                }
            }
            _ => bad.push(format!("{} without its reading", out.action)),
        },
        _ => {
            if !out.observation.is_empty() {
                bad.push(format!("{} produced a reading", out.action));
            }
        }
    }
    if x.t != s.t + 1 {
        bad.push("time did not advance by one".into());
    }
    bad
}

/// Default layout with random yield and loss laws.
pub fn fuzz_config(rng: &mut SmallRng) -> ProblemConfig {
    let mut c = ProblemConfig::table1();
    if rng.random_bool(0.5) {
        c.apply_domestic_loss = true;
    }
    for s in &mut c.sites {
        let mean = rng.random_range(500.0..30_000.0);
        s.yield_dist = match rng.random_range(0..3) {
            0 => Dist::normal(mean, mean * 0.5),
            1 => Dist::uniform(0.0, 2.0 * mean),
            _ => Dist::Constant(mean.round()),
        };
        s.loss = Dist::normal(rng.random_range(0.0..2000.0), 500.0);
    }
    c.obs_cap = [None, Some(50_000.0)][rng.random_range(0..2)];
    c
}

