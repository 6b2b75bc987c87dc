use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::baselines::{Policy, PolicyKind, PolicyRng, PolicySettings};
use crate::config::ProblemConfig;
use crate::dist::{mix_seed, CrnNoise};
use crate::domain::{is_valid, Action, State};
use crate::dynamics::{step, StepOutcome};
use crate::error::{Error, Result};
use crate::Belief;

/// Stream tag of the policy rng, disjoint from the world-noise tags.
const POLICY_STREAM: u64 = 0x706f_6c69_6379;

/// Per-episode totals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Step of the first domestic BUILD.
    pub first_domestic_year: Option<u32>,
    /// Mass delivered to processing, `sum_t l_t`.
    pub processed: f64,
    /// Net emissions, `sum_t R2`.
    pub co2: f64,
    pub demand: f64,
    pub unfulfilled: f64,
    pub unfulfilled_pct: f64,
    /// Undiscounted `sum_t R4`.
    pub profit: f64,
    pub discounted_reward: f64,
    pub explorations: u32,
}

/// Incremental metric accumulator used by the episode loop.
#[derive(Clone, Debug, Default)]
pub struct MetricsAccumulator {
    first_domestic_year: Option<u32>,
    processed: f64,
    co2: f64,
    demand: f64,
    unfulfilled: f64,
    profit: f64,
    discounted: f64,
    discount: Option<f64>,
    explorations: u32,
}

impl MetricsAccumulator {
    pub fn push(&mut self, out: &StepOutcome, config: &ProblemConfig) {
        if let Action::Build(j) = out.action {
            if config.is_domestic(j) && self.first_domestic_year.is_none() {
                self.first_domestic_year = Some(out.state.t);
            }
        }
        if out.action.is_explore() {
            self.explorations += 1;
        }
        let g = self.discount.unwrap_or(1.0);
        self.processed += out.feed;
        self.co2 += out.reward_parts.r2_emissions;
        self.demand += out.demand;
        self.unfulfilled += out.reward_parts.r3_unfulfilled;
        self.profit += out.reward_parts.r4_profit;
        self.discounted += g * out.reward_total;
        self.discount = Some(g * config.discount);
    }

    pub fn finish(&self) -> EpisodeMetrics {
        EpisodeMetrics {
            first_domestic_year: self.first_domestic_year,
            processed: self.processed,
            co2: self.co2,
            demand: self.demand,
            unfulfilled: self.unfulfilled,
            unfulfilled_pct: unfulfilled_pct(self.unfulfilled, self.demand),
            profit: self.profit,
            discounted_reward: self.discounted,
            explorations: self.explorations,
        }
    }
}

fn unfulfilled_pct(unfulfilled: f64, demand: f64) -> f64 {
    if demand > 0.0 {
        100.0 * unfulfilled / demand
    } else {
        0.0
    }
}

impl EpisodeMetrics {
    /// Recompute every metric from the raw step records.
    pub fn from_steps(steps: &[StepOutcome], config: &ProblemConfig) -> Self {
        let sum = |f: &dyn Fn(&StepOutcome) -> f64| steps.iter().fold(0.0, |acc, s| acc + f(s));
        let demand = sum(&|s| s.demand);
        let unfulfilled = sum(&|s| s.reward_parts.r3_unfulfilled);
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward_total).collect();
        EpisodeMetrics {
            first_domestic_year: steps.iter().find_map(|s| match s.action {
                Action::Build(j) if config.is_domestic(j) => Some(s.state.t),
                _ => None,
            }),
            processed: sum(&|s| s.feed),
            co2: sum(&|s| s.reward_parts.r2_emissions),
            demand,
            unfulfilled,
            unfulfilled_pct: unfulfilled_pct(unfulfilled, demand),
            profit: sum(&|s| s.reward_parts.r4_profit),
            discounted_reward: discounted_return(&rewards, config.discount),
            explorations: steps.iter().filter(|s| s.action.is_explore()).count() as u32,
        }
    }
}

/// `sum_t gamma^t r_t`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut g = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += g * r;
        g *= gamma;
    }
    total
}

/// Full record of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub policy: String,
    pub seed: u64,
    pub true_reserves: Vec<f64>,
    pub steps: Vec<StepOutcome>,
    /// Belief before each decision plus the terminal belief.
    pub beliefs: Vec<Belief>,
    pub metrics: EpisodeMetrics,
}

impl EpisodeTrace {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward_total).collect()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn terminal_belief(&self) -> &Belief {
        self.beliefs.last().expect("the initial belief is always recorded")
    }

    /// True reserves after the last step.
    pub fn final_reserves(&self) -> &[f64] {
        self.steps
            .last()
            .map_or(&self.true_reserves, |s| &s.next_state.reserves)
    }

    /// `|mu_j - v_j|` between the terminal belief and the terminal truth.
    pub fn terminal_error(&self, site: usize) -> f64 {
        (self.terminal_belief().mean[site] - self.final_reserves()[site]).abs()
    }

    pub fn explored(&self, site: usize) -> bool {
        self.steps.iter().any(|s| s.action == Action::Explore(site))
    }
}

/// Rng a policy receives for the episode with `seed`.
pub fn policy_rng(seed: u64) -> PolicyRng {
    PolicyRng::seed_from_u64(mix_seed(&[seed, POLICY_STREAM]))
}

/// Run `policy` for the full horizon against the scenario's true reserves.
///
/// World noise depends only on `seed`, so two policies run with the same seed
/// see the same demand and the same draws wherever their states agree.
pub fn run_episode(scenario: &Scenario, policy: &mut dyn Policy, seed: u64) -> Result<EpisodeTrace> {
    let config = &scenario.config;
    let mut state = State::initial(scenario.true_reserves.clone());
    let mut belief = scenario.initial_belief()?;
    let mut noise = CrnNoise::new(seed);
    let mut rng = policy_rng(seed);
    let mut acc = MetricsAccumulator::default();
    let mut steps = Vec::with_capacity(config.horizon as usize);
    let mut beliefs = Vec::with_capacity(config.horizon as usize + 1);

    policy.begin_episode(config, &belief, &mut rng)?;
    beliefs.push(belief.clone());
    while !state.is_terminal(config) {
        let action = policy.act(config, &belief, &mut rng)?;
        if !is_valid(action, &state.operating, &state.built) {
            return Err(Error::Contract(format!(
                "policy {} chose invalid action {action} at t={} (seed {seed})",
                policy.name(),
                state.t
            )));
        }
        let out = step(&state, action, config, &mut noise)?;
        belief = belief.update(action, &out.observation, &out.next_state.observables(), config)?;
        acc.push(&out, config);
        state = out.next_state.clone();
        beliefs.push(belief.clone());
        steps.push(out);
    }
    Ok(EpisodeTrace {
        policy: policy.name().to_string(),
        seed,
        true_reserves: scenario.true_reserves.clone(),
        steps,
        beliefs,
        metrics: acc.finish(),
    })
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub std: f64,
}

impl MetricStat {
    /// NaN mean for an empty sample; zero std below two values.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MetricStat { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MetricStat { mean, std }
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Aggregates of one policy over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub policy: String,
    pub episodes: usize,
    /// Over the episodes that build domestically.
    pub first_domestic_year: MetricStat,
    pub first_domestic_median: Option<f64>,
    /// Episodes without a domestic build.
    pub never_domestic: usize,
    pub processed: MetricStat,
    pub co2: MetricStat,
    pub unfulfilled_pct: MetricStat,
    pub profit: MetricStat,
    pub discounted_reward: MetricStat,
    pub explorations: MetricStat,
}

impl MetricsSummary {
    pub fn from_metrics(policy: &str, metrics: &[EpisodeMetrics]) -> Self {
        let col = |f: fn(&EpisodeMetrics) -> f64| MetricStat::of(&metrics.iter().map(f).collect::<Vec<_>>());
        let years: Vec<f64> = metrics
            .iter()
            .filter_map(|m| m.first_domestic_year.map(f64::from))
            .collect();
        MetricsSummary {
            policy: policy.to_string(),
            episodes: metrics.len(),
            first_domestic_year: MetricStat::of(&years),
            first_domestic_median: median(&years),
            never_domestic: metrics.len() - years.len(),
            processed: col(|m| m.processed),
            co2: col(|m| m.co2),
            unfulfilled_pct: col(|m| m.unfulfilled_pct),
            profit: col(|m| m.profit),
            discounted_reward: col(|m| m.discounted_reward),
            explorations: col(|m| m.explorations as f64),
        }
    }
}

/// Paired-seed results of several policies on one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub scenario: String,
    pub seeds: Vec<u64>,
    /// One row per requested policy, in request order.
    pub rows: Vec<MetricsSummary>,
    /// `traces[k][i]` is policy `k` on `seeds[i]`.
    pub traces: Vec<Vec<EpisodeTrace>>,
}

impl Comparison {
    pub fn row(&self, policy: &str) -> Option<&MetricsSummary> {
        self.rows.iter().find(|r| r.policy == policy)
    }

    pub fn traces_of(&self, policy: &str) -> Option<&[EpisodeTrace]> {
        self.rows
            .iter()
            .position(|r| r.policy == policy)
            .map(|k| self.traces[k].as_slice())
    }
}

/// Seeds `base, base + 1, ...`.
pub fn seed_range(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Run a freshly built policy on every seed; episodes fan out over the rayon
/// pool and come back in seed order.
pub fn run_seeds<F>(scenario: &Scenario, make: F, seeds: &[u64]) -> Result<Vec<EpisodeTrace>>
where
    F: Fn() -> Box<dyn Policy> + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| run_episode(scenario, make().as_mut(), seed))
        .collect()
}

impl Comparison {
    /// Assemble from per-policy traces, all on the same seeds.
    pub fn from_traces(scenario: &Scenario, seeds: &[u64], traces: Vec<Vec<EpisodeTrace>>) -> Self {
        let rows = traces
            .iter()
            .map(|ts| {
                let name = ts.first().map_or("", |t| t.policy.as_str());
                let m: Vec<EpisodeMetrics> = ts.iter().map(|t| t.metrics.clone()).collect();
                MetricsSummary::from_metrics(name, &m)
            })
            .collect();
        Comparison {
            scenario: scenario.label.to_string(),
            seeds: seeds.to_vec(),
            rows,
            traces,
        }
    }
}

/// Run every policy on every seed with paired world noise.
pub fn compare_policies(
    scenario: &Scenario,
    policies: &[PolicyKind],
    settings: &PolicySettings,
    seeds: &[u64],
) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::Domain("at least one seed is required".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..policies.len())
        .flat_map(|k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let results: Vec<EpisodeTrace> = jobs
        .par_iter()
        .map(|&(k, seed)| run_episode(scenario, policies[k].build(settings).as_mut(), seed))
        .collect::<Result<_>>()?;
    let mut it = results.into_iter();
    let traces = policies
        .iter()
        .map(|_| it.by_ref().take(seeds.len()).collect())
        .collect();
    Ok(Comparison::from_traces(scenario, seeds, traces))
}
