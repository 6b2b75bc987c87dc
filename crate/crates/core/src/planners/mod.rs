//! Online belief-space planners and the exact small-instance oracle.
//!
//! Both planners search from a root distribution over full states and only
//! need to draw samples from it ([`RootSampler`]), so the Gaussian belief and
//! the discrete priors of the oracle instances plug in alike.

mod despot;
mod exact;
mod pomcpow;

use std::fmt;
use std::str::FromStr;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::baselines::{greedy_rule, PolicyRng};
use crate::config::ProblemConfig;
use crate::dist::{mix_seed, Noise};
use crate::domain::{valid_actions_for, Action, Observables, State};
use crate::dynamics::step_in_place;
use crate::error::{Error, Result};
use crate::Belief;

pub use despot::{plan_despot, DespotPlanner};
pub use exact::{
    solve_exact_small, solve_exact_without_explore, DiscretePrior, ExactSolution, TinyInstance,
};
pub use pomcpow::{plan_pomcpow, PomcpowPlanner};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutKind {
    Greedy,
    Random,
}

impl FromStr for RolloutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" => Ok(RolloutKind::Greedy),
            "random" => Ok(RolloutKind::Random),
            other => Err(Error::Domain(format!(
                "unknown rollout policy `{other}` (expected greedy or random)"
            ))),
        }
    }
}

impl fmt::Display for RolloutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RolloutKind::Greedy => "greedy",
            RolloutKind::Random => "random",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Simulations (POMCPOW-style) or trials (DESPOT-style) per decision.
    pub iterations: usize,
    pub max_depth: u32,
    pub ucb: f64,
    pub k_obs: f64,
    pub alpha_obs: f64,
    /// Determinized scenarios of the DESPOT-style search.
    pub scenarios: usize,
    pub rollout: RolloutKind,
    /// Fixed per-decision seed; when unset, seeds come from the caller's rng.
    pub seed: Option<u64>,
    /// Keep a search report for every decision.
    pub record: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            iterations: 2000,
            max_depth: 15,
            ucb: 100.0,
            k_obs: 4.0,
            alpha_obs: 0.1,
            scenarios: 50,
            rollout: RolloutKind::Greedy,
            seed: None,
            record: false,
        }
    }
}

impl PlannerConfig {
    pub fn check(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.iterations < 1 {
            bad.push("iterations must be >= 1");
        }
        if self.max_depth < 1 {
            bad.push("max_depth must be >= 1");
        }
        if self.scenarios < 1 {
            bad.push("scenarios must be >= 1");
        }
        if !(0.0..1.0).contains(&self.alpha_obs) {
            bad.push("alpha_obs must lie in [0, 1)");
        }
        if !(self.k_obs > 0.0) {
            bad.push("k_obs must be > 0");
        }
        if !(self.ucb >= 0.0 && self.ucb.is_finite()) {
            bad.push("ucb must be finite and >= 0");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(format!("planner config: {}", bad.join("; "))))
        }
    }

    /// Search rng for the decision at step `t`.
    pub(crate) fn decision_rng(&self, t: u32, rng: &mut PolicyRng) -> SmallRng {
        let seed = match self.seed {
            Some(s) => mix_seed(&[s, t as u64]),
            None => rng.random(),
        };
        SmallRng::seed_from_u64(seed)
    }
}

/// Source of root states for a search.
pub trait RootSampler {
    fn observables(&self) -> &Observables;
    fn sample(&self, config: &ProblemConfig, rng: &mut SmallRng) -> State;
}

impl RootSampler for Belief {
    fn observables(&self) -> &Observables {
        &self.observables
    }

    fn sample(&self, config: &ProblemConfig, rng: &mut SmallRng) -> State {
        self.sample_state(config, rng)
    }
}

/// Statistics of one root action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionStat {
    pub action: Action,
    pub visits: u32,
    pub value: f64,
}

/// Outcome of one search, serializable as a debug trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub planner: String,
    pub t: u32,
    pub action: Action,
    /// Estimated optimal value at the root.
    pub value: f64,
    pub iterations: usize,
    pub root: Vec<ActionStat>,
}

/// Highest-valued visited action; the earliest in canonical order wins ties.
pub(crate) fn best_root(stats: &[ActionStat]) -> Option<(Action, f64)> {
    let mut best: Option<(Action, f64)> = None;
    for s in stats.iter().filter(|s| s.visits > 0) {
        if best.is_none_or(|(_, v)| s.value > v) {
            best = Some((s.action, s.value));
        }
    }
    best
}

pub(crate) fn ensure_actions(obs: &Observables) -> Result<Vec<Action>> {
    let acts = valid_actions_for(&obs.operating, &obs.built);
    if acts.is_empty() {
        return Err(Error::Contract("no valid action at the root".into()));
    }
    Ok(acts)
}

/// Action of the rollout policy in `state`.
pub(crate) fn rollout_action(
    state: &State,
    config: &ProblemConfig,
    kind: RolloutKind,
    rng: &mut SmallRng,
) -> Action {
    match kind {
        RolloutKind::Greedy => {
            greedy_rule(&state.reserves, &state.operating, &state.built, state.t, config)
        }
        RolloutKind::Random => {
            let acts = valid_actions_for(&state.operating, &state.built);
            acts[rng.random_range(0..acts.len())]
        }
    }
}

/// Discounted return of the rollout policy from `state` to the horizon.
pub(crate) fn rollout(
    mut state: State,
    config: &ProblemConfig,
    kind: RolloutKind,
    noise: &mut impl Noise,
    rng: &mut SmallRng,
) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    while state.t < config.horizon {
        let a = rollout_action(&state, config, kind, rng);
        let (r, _) = step_in_place(&mut state, a, config, noise).expect("rollout actions are valid");
        total += discount * r;
        discount *= config.discount;
    }
    total
}

/// One foreign site with constant yield, no loss and constant demand 200.
#[cfg(test)]
pub(crate) fn toy_config(horizon: u32) -> ProblemConfig {
    use crate::config::DemandBand;
    use crate::dist::Dist;
    let mut c = ProblemConfig::table1();
    c.sites = vec![c.sites[2].clone()];
    c.sites[0].yield_dist = Dist::Constant(2000.0);
    c.sites[0].loss = Dist::Constant(0.0);
    c.horizon = horizon;
    c.demand = vec![DemandBand {
        from_year: 1,
        to_year: horizon.max(1),
        dist: Dist::Constant(200.0),
    }];
    c.obs_bin = 1000.0;
    c.obs_cap = Some(4000.0);
    c.obs_noise = 1000.0;
    c.emission_scale = 1e-6;
    c.costs.build = 10.0;
    c.costs.explore = 1.0;
    c.belief.mean = Some(vec![4000.0]);
    c.belief.std = 0.0;
    c.scenarios = None;
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::CrnNoise;
    use crate::dynamics::step;
    use crate::harness::discounted_return;

    #[test]
    fn rollout_discounting_matches_the_harness() {
        let c = ProblemConfig::table1();
        let mut rng = SmallRng::seed_from_u64(1);
        for seed in 0..10 {
            let start = State::initial(vec![90_000.0, 60_000.0, 30_000.0, 10_000.0]);
            let value = rollout(start.clone(), &c, RolloutKind::Greedy, &mut CrnNoise::new(seed), &mut rng);
            let mut noise = CrnNoise::new(seed);
            let mut s = start;
            let mut rewards = Vec::new();
            while s.t < c.horizon {
                let a = greedy_rule(&s.reserves, &s.operating, &s.built, s.t, &c);
                let out = step(&s, a, &c, &mut noise).unwrap();
                rewards.push(out.reward_total);
                s = out.next_state;
            }
            let expected = discounted_return(&rewards, c.discount);
            assert!((value - expected).abs() <= 1e-9 * expected.abs().max(1.0), "{value} vs {expected}");
        }
    }

    #[test]
    fn default_config_is_valid() {
        PlannerConfig::default().check().unwrap();
        let bad = PlannerConfig {
            alpha_obs: 1.0,
            iterations: 0,
            ..PlannerConfig::default()
        };
        let msg = bad.check().unwrap_err().to_string();
        assert!(msg.contains("alpha_obs") && msg.contains("iterations"));
    }

    #[test]
    fn best_root_prefers_earliest_on_ties() {
        let stats = vec![
            ActionStat { action: Action::DoNothing, visits: 3, value: 1.0 },
            ActionStat { action: Action::Build(0), visits: 3, value: 1.0 },
            ActionStat { action: Action::Build(1), visits: 0, value: 9.0 },
        ];
        assert_eq!(best_root(&stats), Some((Action::DoNothing, 1.0)));
    }
}
