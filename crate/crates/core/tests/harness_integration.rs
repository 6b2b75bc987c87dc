use mineral_pomdp::baselines::{PolicyKind, PolicySettings};
use mineral_pomdp::harness::{compare_policies, median, seed_range, Comparison, Scenario, ScenarioLabel};
use mineral_pomdp::{Dist, ProblemConfig};

fn quick_settings() -> PolicySettings {
    let mut s = PolicySettings::default();
    s.planner.iterations = 300;
    s.planner.scenarios = 20;
    s.saa_scenarios = 50;
    s
}

fn traces_json(c: &Comparison) -> String {
    serde_json::to_string(&c.traces).unwrap()
}

fn in_pool(threads: usize, f: impl FnOnce() -> Comparison + Send) -> Comparison {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn traces_do_not_depend_on_thread_count() {
    let sc = Scenario::inaccurate(ProblemConfig::table1()).unwrap();
    let policies = [PolicyKind::Greedy, PolicyKind::Random, PolicyKind::Stochastic, PolicyKind::Pomcpow];
    let seeds = seed_range(40, 3);
    let s = quick_settings();
    let one = in_pool(1, || compare_policies(&sc, &policies, &s, &seeds).unwrap());
    let three = in_pool(3, || compare_policies(&sc, &policies, &s, &seeds).unwrap());
    assert_eq!(traces_json(&one), traces_json(&three));
    assert_eq!(one.rows, three.rows);
}

#[test]
fn larger_domestic_yields_bring_domestic_mining_forward() {
    let mut years = Vec::new();
    for factor in [1.0, 2.0] {
        let mut c = ProblemConfig::table1();
        for site in c.sites.iter_mut().filter(|s| s.is_domestic()) {
            if let Dist::Normal { mean, std } = site.yield_dist {
                site.yield_dist = Dist::normal(mean * factor, std);
            }
        }
        let sc = Scenario::inaccurate(c).unwrap();
        let cmp = compare_policies(&sc, &[PolicyKind::Despot], &quick_settings(), &seed_range(0, 20)).unwrap();
        let first: Vec<f64> = cmp.traces[0]
            .iter()
            .map(|t| t.metrics.first_domestic_year.map_or(f64::from(sc.config.horizon), f64::from))
            .collect();
        years.push(median(&first).unwrap());
    }
    assert!(years[1] <= years[0], "median first domestic build {years:?}");
}

#[test]
fn scenarios_meet_their_bounds_on_varied_configs() {
    for std in [2000.0, 10_000.0, 30_000.0] {
        let mut c = ProblemConfig::table1();
        c.belief.std = std;
        for label in [ScenarioLabel::Accurate, ScenarioLabel::Inaccurate] {
            let sc = Scenario::from_label(label, c.clone()).unwrap();
            sc.check().unwrap();
            assert!(sc.true_reserves.iter().all(|&v| v >= 0.0 && v % c.reserve_bin == 0.0));
            let b = sc.initial_belief().unwrap();
            assert_eq!(b.mean, sc.prior_mean);
            assert_eq!(b.std, sc.prior_std);
        }
    }
}

#[test]
fn paired_seeds_share_world_noise_across_policies() {
    let sc = Scenario::accurate(ProblemConfig::table1()).unwrap();
    let cmp = compare_policies(
        &sc,
        &[PolicyKind::Greedy, PolicyKind::ImportOnly, PolicyKind::Random],
        &quick_settings(),
        &seed_range(5, 4),
    )
    .unwrap();
    for i in 0..4 {
        let demand = |p: usize| -> Vec<f64> { cmp.traces[p][i].steps.iter().map(|s| s.demand).collect() };
        assert_eq!(demand(0), demand(1));
        assert_eq!(demand(0), demand(2));
    }
}
