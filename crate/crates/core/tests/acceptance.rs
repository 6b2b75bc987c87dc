//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. Set
//! `ACCEPTANCE_ONLY=1,3` to run a subset.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{fuzz_config, grid_posterior, violations};
use mineral_pomdp::baselines::{PolicyKind, PolicySettings};
use mineral_pomdp::belief::{kalman_update, repeated_update_variance};
use mineral_pomdp::dynamics::step;
use mineral_pomdp::harness::{
    compare_policies, median, run_episode, seed_range, Comparison, EpisodeTrace, Scenario,
    ScenarioLabel, INACCURATE_BOUND,
};
use mineral_pomdp::planners::{
    solve_exact_small, DespotPlanner, PlannerConfig, PomcpowPlanner, TinyInstance,
};
use mineral_pomdp::{Action, Belief, CrnNoise, Observation, ProblemConfig, State};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let took = start.elapsed();
    (took <= limit, format!("{:.1}s of {}s", took.as_secs_f64(), limit.as_secs()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = SmallRng::seed_from_u64(1);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let mu: f64 = rng.random_range(0.0..200_000.0);
        let sigma: f64 = rng.random_range(500.0..20_000.0);
        let sigma_o: f64 = rng.random_range(500.0..20_000.0);
        let spread = (sigma * sigma + sigma_o * sigma_o).sqrt();
        let reading = (mu + rng.random_range(-3.0..3.0f64) * spread).max(0.0);
        let (m, s) = kalman_update(mu, sigma, sigma_o, reading);
        let (gm, gv) = grid_posterior(mu, sigma, sigma_o, reading);
        worst_mean = worst_mean.max((m - gm).abs());
        worst_var = worst_var.max(((s * s - gv) / gv).abs());
    }

    // k readings through the belief itself
    let config = ProblemConfig::table1();
    let prior = Belief::prior(&config);
    let (s0, so) = (prior.std[0], config.obs_noise);
    let mut b = prior.clone();
    let mut worst_k = 0.0f64;
    let no_drawdown = vec![0.0; config.n_sites()];
    for k in 1..=30u32 {
        let mut reading = vec![-1.0; config.n_sites()];
        reading[0] = 90_000.0;
        let obs = b.observables.clone();
        b = b
            .update_with(Action::Explore(0), &Observation::from_sentinel(&reading), &obs, so, &no_drawdown)
            .unwrap();
        let expect = s0 * s0 * so * so / (so * so + f64::from(k) * s0 * s0);
        worst_k = worst_k.max(((b.variance(0) - expect) / expect).abs());
        worst_k = worst_k.max(((repeated_update_variance(s0, so, k) - expect) / expect).abs());
    }
    let (fast, time) = within(Duration::from_secs(10), start);
    outcome(
        worst_mean < 0.1 && worst_var < 1e-3 && worst_k < 1e-9 && fast,
        format!(
            "100 cases: max mean gap {worst_mean:.2e} (< 0.1), max variance gap {:.2e}% (< 0.1%); \
             k-step variance max rel error {worst_k:.1e} (< 1e-9); {time}",
            worst_var * 100.0
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = SmallRng::seed_from_u64(2);
    let (mut steps, mut bad) = (0usize, Vec::new());
    for episode in 0..10_000u64 {
        let config = if episode % 4 == 0 {
            ProblemConfig::table1()
        } else {
            fuzz_config(&mut rng)
        };
        let reserves: Vec<f64> = (0..config.n_sites())
            .map(|_| (rng.random_range(0.0..150_000.0f64) / 1000.0).round() * 1000.0)
            .collect();
        let mut state = State::initial(reserves);
        let mut noise = CrnNoise::new(episode);
        while !state.is_terminal(&config) {
            let acts = state.valid_actions();
            let out = step(&state, acts[rng.random_range(0..acts.len())], &config, &mut noise).unwrap();
            bad.extend(violations(&out, &config));
            steps += 1;
            state = out.next_state;
        }
    }
    let (fast, time) = within(Duration::from_secs(120), start);
    outcome(
        bad.is_empty() && fast,
        format!(
            "10000 episodes, {steps} steps, {} violations{}; {time}",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let n = 40u64;
    let params = PlannerConfig {
        iterations: 10_000,
        max_depth: 10,
        ..PlannerConfig::default()
    };
    let mut value_ok = [0u32; 2];
    let mut action_ok = [0u32; 2];
    let mut worst = [0.0f64; 2];
    for seed in 0..n {
        let inst = TinyInstance::random(seed);
        let exact = solve_exact_small(&inst);
        let reports = [
            DespotPlanner::new(params.clone())
                .search(&inst.prior, &inst.config, &mut SmallRng::seed_from_u64(seed))
                .unwrap(),
            PomcpowPlanner::new(params.clone())
                .search(&inst.prior, &inst.config, &mut SmallRng::seed_from_u64(seed))
                .unwrap(),
        ];
        for (k, r) in reports.iter().enumerate() {
            let rel = (r.value - exact.value).abs() / exact.value.abs();
            worst[k] = worst[k].max(rel);
            value_ok[k] += u32::from(rel <= 0.10);
            action_ok[k] += u32::from(exact.optimal.contains(&r.action));
        }
    }
    let (fast, time) = within(Duration::from_secs(300), start);
    let rate = |k: usize| f64::from(action_ok[k]) / n as f64;
    let pass = value_ok.iter().all(|&v| u64::from(v) == n) && rate(0) >= 0.9 && rate(1) >= 0.9 && fast;
    outcome(
        pass,
        format!(
            "{n} tiny instances at 10^4 iterations: despot values {}/{n} within 10% (worst {:.1}%), \
             actions {}/{n}; pomcpow values {}/{n} within 10% (worst {:.1}%), actions {}/{n}; {time}",
            value_ok[0],
            worst[0] * 100.0,
            action_ok[0],
            value_ok[1],
            worst[1] * 100.0,
            action_ok[1]
        ),
    )
}

const INACCURATE_POLICIES: [PolicyKind; 5] = [
    PolicyKind::Despot,
    PolicyKind::Pomcpow,
    PolicyKind::Stochastic,
    PolicyKind::ImportOnly,
    PolicyKind::Greedy,
];

/// 100 paired seeds on the inaccurate scenario, shared by several criteria.
fn inaccurate_runs() -> &'static (Comparison, Duration) {
    static RUNS: OnceLock<(Comparison, Duration)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let sc = Scenario::inaccurate(ProblemConfig::table1()).unwrap();
        let cmp = compare_policies(&sc, &INACCURATE_POLICIES, &PolicySettings::default(), &seed_range(0, 100))
            .unwrap();
        (cmp, start.elapsed())
    })
}

fn mean_reward(cmp: &Comparison, policy: &str) -> f64 {
    cmp.row(policy).unwrap().discounted_reward.mean
}

fn criterion_4() -> Outcome {
    let (cmp, took) = inaccurate_runs();
    let [despot, pomcpow, stochastic, import] =
        ["despot", "pomcpow", "stochastic", "import-only"].map(|p| mean_reward(cmp, p));
    let fast = *took <= Duration::from_secs(30 * 60);
    outcome(
        despot > stochastic && stochastic > import && pomcpow > import && fast,
        format!(
            "100 seeds, mean discounted reward: despot {despot:.1} > stochastic {stochastic:.1} > \
             import-only {import:.1}; pomcpow {pomcpow:.1} > import-only; gaps {:.1}, {:.1}, {:.1}; \
             {:.1}s of 1800s",
            despot - stochastic,
            stochastic - import,
            pomcpow - import,
            took.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let inaccurate = inaccurate_runs().0.row("import-only").unwrap().unfulfilled_pct.mean;
    let sc = Scenario::accurate(ProblemConfig::table1()).unwrap();
    let accurate = compare_policies(&sc, &[PolicyKind::ImportOnly], &PolicySettings::default(), &seed_range(0, 100))
        .unwrap()
        .rows[0]
        .unfulfilled_pct
        .mean;
    outcome(
        accurate > 50.0 && inaccurate > 50.0,
        format!("import-only unfulfilled demand: accurate {accurate:.2}%, inaccurate {inaccurate:.2}% (> 50%)"),
    )
}

/// Best terminal/initial error ratio over explored, misestimated sites;
/// infinite when the episode explored none of them.
fn tracking_ratio(trace: &EpisodeTrace, sc: &Scenario) -> f64 {
    let z = sc.z_scores();
    (0..sc.config.n_sites())
        .filter(|&j| trace.explored(j) && z[j] >= INACCURATE_BOUND)
        .map(|j| trace.terminal_error(j) / sc.initial_error(j))
        .fold(f64::INFINITY, f64::min)
}

fn criterion_6() -> Outcome {
    let cmp = &inaccurate_runs().0;
    let sc = Scenario::inaccurate(ProblemConfig::table1()).unwrap();
    let med = |policy: &str| {
        let ratios: Vec<f64> =
            cmp.traces_of(policy).unwrap()[..20].iter().map(|t| tracking_ratio(t, &sc)).collect();
        median(&ratios).unwrap()
    };
    let (despot, pomcpow) = (med("despot"), med("pomcpow"));
    let baselines_blind = ["stochastic", "import-only", "greedy"].iter().all(|p| {
        cmp.traces_of(p).unwrap()[..20].iter().all(|t| {
            t.metrics.explorations == 0 && t.terminal_belief().std == sc.prior_std
        })
    });
    let show = |v: f64| {
        if v.is_finite() {
            format!("{:.1}%", v * 100.0)
        } else {
            "no site explored".to_string()
        }
    };
    outcome(
        despot.min(pomcpow) < 0.25 && baselines_blind,
        format!(
            "20 seeds, median best terminal/initial error on explored sites: despot {}, pomcpow {} \
             (< 25% for either); baselines never explore and keep the prior std: {baselines_blind}",
            show(despot),
            show(pomcpow)
        ),
    )
}

fn criterion_7() -> Outcome {
    let cmp = &inaccurate_runs().0;
    let horizon = f64::from(ProblemConfig::table1().horizon);
    let med = |policy: &str| {
        let years: Vec<f64> = cmp.traces_of(policy).unwrap()[..20]
            .iter()
            .map(|t| t.metrics.first_domestic_year.map_or(horizon, f64::from))
            .collect();
        median(&years).unwrap()
    };
    let delay = f64::from(ProblemConfig::table1().delay_goal);
    let [greedy, despot, pomcpow] = ["greedy", "despot", "pomcpow"].map(med);
    let early = ["despot", "pomcpow"]
        .iter()
        .flat_map(|p| cmp.traces_of(p).unwrap()[..20].iter())
        .filter(|t| t.steps.iter().any(|s| s.reward_parts.r1_domestic_penalty > 0.0))
        .count();
    outcome(
        greedy == delay && despot >= delay && pomcpow >= delay,
        format!(
            "20 seeds, median first domestic build: greedy {greedy} (= {delay}), despot {despot}, \
             pomcpow {pomcpow} (>= {delay}); planner episodes with an early-build penalty: {early}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let settings = PolicySettings::default();
    let mut mismatches = Vec::new();
    for label in [ScenarioLabel::Accurate, ScenarioLabel::Inaccurate] {
        let sc = Scenario::from_label(label, ProblemConfig::table1()).unwrap();
        for kind in PolicyKind::ALL {
            let run = || {
                let t = run_episode(&sc, kind.build(&settings).as_mut(), 17).unwrap();
                serde_json::to_string(&t).unwrap()
            };
            if run() != run() {
                mismatches.push(format!("{label}/{}", kind.as_str()));
            }
        }
    }
    let sc = Scenario::inaccurate(ProblemConfig::table1()).unwrap();
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| compare_policies(&sc, &PolicyKind::ALL, &settings, &seed_range(3, 2)).unwrap())
    };
    let threads_agree =
        serde_json::to_string(&in_pool(1).traces).unwrap() == serde_json::to_string(&in_pool(4).traces).unwrap();
    outcome(
        mismatches.is_empty() && threads_agree,
        format!(
            "repeat runs of 7 policies x 2 scenarios identical: {}; 1 vs 4 threads identical: {threads_agree}",
            if mismatches.is_empty() { "yes".to_string() } else { format!("no ({})", mismatches.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut failed = 0;
    for (id, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let o = check();
        println!("criterion {id}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
