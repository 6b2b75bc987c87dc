//! Online planners against exact expectimax on tiny instances.

use mineral_pomdp::planners::{
    solve_exact_small, solve_exact_without_explore, DespotPlanner, PlannerConfig, PomcpowPlanner,
    SearchReport, TinyInstance,
};
use rand::rngs::SmallRng;
use rand::SeedableRng;

fn params(iterations: usize) -> PlannerConfig {
    PlannerConfig {
        iterations,
        max_depth: 10,
        ..PlannerConfig::default()
    }
}

fn searches(inst: &TinyInstance, p: &PlannerConfig, seed: u64) -> [SearchReport; 2] {
    let d = DespotPlanner::new(p.clone())
        .search(&inst.prior, &inst.config, &mut SmallRng::seed_from_u64(seed))
        .unwrap();
    let q = PomcpowPlanner::new(p.clone())
        .search(&inst.prior, &inst.config, &mut SmallRng::seed_from_u64(seed))
        .unwrap();
    [d, q]
}

#[test]
fn value_error_shrinks_with_budget() {
    let instances: Vec<TinyInstance> = (100..115).map(TinyInstance::random).collect();
    let exact: Vec<f64> = instances.iter().map(|i| solve_exact_small(i).value).collect();
    let mut errors = Vec::new();
    for iterations in [30, 10_000] {
        let mut err = [0.0; 2];
        for (seed, (inst, v)) in instances.iter().zip(&exact).enumerate() {
            for (e, r) in err.iter_mut().zip(searches(inst, &params(iterations), seed as u64)) {
                *e += (r.value - v).abs() / v.abs() / instances.len() as f64;
            }
        }
        errors.push(err);
    }
    for k in 0..2 {
        assert!(errors[1][k] <= errors[0][k], "planner {k}: errors {errors:?}");
        assert!(errors[1][k] < 0.05, "planner {k}: errors {errors:?}");
    }
}

#[test]
fn generated_instances_are_reproducible_and_solvable() {
    for seed in 0..30 {
        let a = TinyInstance::random(seed);
        let b = TinyInstance::random(seed);
        assert_eq!(a.config, b.config);
        assert_eq!(a.prior, b.prior);
        let with = solve_exact_small(&a);
        let without = solve_exact_without_explore(&a);
        assert!(with.value >= without.value - 1e-9);
        assert!(!with.optimal.is_empty());
        let best = with.q.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        assert!((best - with.value).abs() < 1e-9);
    }
}

#[test]
fn planners_never_pick_an_invalid_root_action() {
    for seed in 0..10 {
        let inst = TinyInstance::random(seed);
        let valid = inst.prior.observables.valid_actions();
        for r in searches(&inst, &params(200), seed) {
            assert!(valid.contains(&r.action));
            assert!(r.value.is_finite());
        }
    }
}
