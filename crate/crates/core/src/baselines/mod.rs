//! Policy interface and the benchmark policies.

mod open_loop;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::ProblemConfig;
use crate::domain::{Action, Observables};
use crate::error::{Error, Result};
use crate::planners::{DespotPlanner, PlannerConfig, PomcpowPlanner};
use crate::Belief;

pub use open_loop::{
    evaluate_plan, induced_plan, plan_open_loop_deterministic, plan_open_loop_stochastic,
    OpenLoopPlan, OpenLoopPolicy, PlanModel, PlanScenario, SitePlan,
};

/// Rng handed to policies by the harness.
pub type PolicyRng = ChaCha8Rng;

/// A decision rule from beliefs to actions.
pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Called once before the first decision of an episode.
    fn begin_episode(
        &mut self,
        _config: &ProblemConfig,
        _belief: &Belief,
        _rng: &mut PolicyRng,
    ) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, config: &ProblemConfig, belief: &Belief, rng: &mut PolicyRng)
        -> Result<Action>;
}

/// Uniform over the valid actions.
pub fn random_action<R: Rng + ?Sized>(obs: &Observables, rng: &mut R) -> Action {
    let acts = obs.valid_actions();
    acts[rng.random_range(0..acts.len())]
}

/// Unbuilt site among `candidates` with the largest estimate, lowest index
/// on ties.
fn largest_unbuilt(
    estimates: &[f64],
    built: &[bool],
    candidates: impl Iterator<Item = usize>,
) -> Option<usize> {
    let mut best: Option<usize> = None;
    for j in candidates.filter(|&j| !built[j]) {
        if best.is_none_or(|b| estimates[j] > estimates[b]) {
            best = Some(j);
        }
    }
    best
}

/// Greedy rule on raw flags: restore depleted sites, build foreign sites
/// largest first, build domestic sites largest first once the delay goal
/// is reached.
pub fn greedy_rule(
    estimates: &[f64],
    operating: &[bool],
    built: &[bool],
    t: u32,
    config: &ProblemConfig,
) -> Action {
    if let Some(j) = (0..operating.len()).find(|&j| operating[j] && estimates[j] <= 0.0) {
        return Action::Restore(j);
    }
    let domestic_open = t >= config.delay_goal;
    let candidates = (0..built.len()).filter(|&j| domestic_open || !config.is_domestic(j));
    match largest_unbuilt(estimates, built, candidates) {
        Some(j) => Action::Build(j),
        None => Action::DoNothing,
    }
}

pub fn greedy_action(estimates: &[f64], obs: &Observables, config: &ProblemConfig) -> Action {
    greedy_rule(estimates, &obs.operating, &obs.built, obs.t, config)
}

/// Foreign sites built largest first as early as possible; nothing else.
pub fn import_only_action(estimates: &[f64], obs: &Observables, config: &ProblemConfig) -> Action {
    match largest_unbuilt(estimates, &obs.built, config.foreign_sites()) {
        Some(j) => Action::Build(j),
        None => Action::DoNothing,
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, _: &ProblemConfig, belief: &Belief, rng: &mut PolicyRng) -> Result<Action> {
        Ok(random_action(&belief.observables, rng))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyPolicy;

impl Policy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn act(&mut self, config: &ProblemConfig, belief: &Belief, _: &mut PolicyRng) -> Result<Action> {
        Ok(greedy_action(&belief.mean, &belief.observables, config))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ImportOnlyPolicy;

impl Policy for ImportOnlyPolicy {
    fn name(&self) -> &str {
        "import-only"
    }

    fn act(&mut self, config: &ProblemConfig, belief: &Belief, _: &mut PolicyRng) -> Result<Action> {
        Ok(import_only_action(&belief.mean, &belief.observables, config))
    }
}

/// Registered policy names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Random,
    Greedy,
    ImportOnly,
    Deterministic,
    Stochastic,
    Pomcpow,
    Despot,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Random,
        PolicyKind::Greedy,
        PolicyKind::ImportOnly,
        PolicyKind::Deterministic,
        PolicyKind::Stochastic,
        PolicyKind::Pomcpow,
        PolicyKind::Despot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Greedy => "greedy",
            PolicyKind::ImportOnly => "import-only",
            PolicyKind::Deterministic => "deterministic",
            PolicyKind::Stochastic => "stochastic",
            PolicyKind::Pomcpow => "pomcpow",
            PolicyKind::Despot => "despot",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(|k| k.as_str()).join(", ")
    }

    /// Whether the policy can ever explore.
    pub fn explores(self) -> bool {
        matches!(self, PolicyKind::Random | PolicyKind::Pomcpow | PolicyKind::Despot)
    }

    pub fn build(self, settings: &PolicySettings) -> Box<dyn Policy> {
        match self {
            PolicyKind::Random => Box::new(RandomPolicy),
            PolicyKind::Greedy => Box::new(GreedyPolicy),
            PolicyKind::ImportOnly => Box::new(ImportOnlyPolicy),
            PolicyKind::Deterministic => Box::new(OpenLoopPolicy::deterministic()),
            PolicyKind::Stochastic => Box::new(OpenLoopPolicy::stochastic(settings.saa_scenarios)),
            PolicyKind::Pomcpow => Box::new(PomcpowPlanner::new(settings.planner.clone())),
            PolicyKind::Despot => Box::new(DespotPlanner::new(settings.planner.clone())),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| Error::UnknownPolicy {
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

/// Tunables shared by the policy factory.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySettings {
    pub planner: PlannerConfig,
    /// Reserve scenarios for the sample-average open-loop plan.
    pub saa_scenarios: usize,
}

impl Default for PolicySettings {
    fn default() -> Self {
        PolicySettings {
            planner: PlannerConfig::default(),
            saa_scenarios: 1000,
        }
    }
}
