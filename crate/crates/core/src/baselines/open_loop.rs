//! Open-loop plans: per-site build and restore years chosen before execution.
//!
//! Both optimizers search the same plan space: every site gets a build year
//! (or never) and a restore year after it (or never), with at most one
//! action per year. EXPLORE is left out because a fixed plan cannot react to
//! what it would reveal.
//!
//! The objective splits into terms that depend on a single site and a
//! per-step term `f(d_t, l_t)` of demand and total feed. Searching one site
//! at a time with the others fixed therefore only needs prefix sums over the
//! horizon for each candidate build year.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::baselines::{greedy_action, import_only_action, Policy, PolicyRng};
use crate::config::ProblemConfig;
use crate::dist::{mix_seed, CrnNoise, MeanNoise, Noise, Stream};
use crate::domain::{Action, State};
use crate::dynamics::{demand_at, step};
use crate::error::{Error, Result};
use crate::Belief;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SitePlan {
    pub build: Option<u32>,
    pub restore: Option<u32>,
}

/// A fixed action per year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopPlan {
    pub horizon: u32,
    pub actions: Vec<Action>,
    /// Objective claimed by the optimizer that produced the plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

impl OpenLoopPlan {
    pub fn idle(horizon: u32) -> Self {
        OpenLoopPlan {
            horizon,
            actions: vec![Action::DoNothing; horizon as usize],
            objective: None,
        }
    }

    pub fn from_sites(sites: &[SitePlan], horizon: u32) -> Self {
        let mut plan = Self::idle(horizon);
        for (j, s) in sites.iter().enumerate() {
            if let Some(b) = s.build {
                plan.actions[b as usize] = Action::Build(j);
            }
            if let Some(r) = s.restore {
                plan.actions[r as usize] = Action::Restore(j);
            }
        }
        plan
    }

    /// Per-site view; fails on sequences outside the plan space.
    pub fn site_plans(&self, n: usize) -> Result<Vec<SitePlan>> {
        let mut sites = vec![SitePlan::default(); n];
        for (t, a) in self.actions.iter().enumerate() {
            let t = t as u32;
            let bad = |why: &str| Error::Domain(format!("plan action {a} at t={t}: {why}"));
            match *a {
                Action::DoNothing => {}
                Action::Explore(_) => return Err(bad("open-loop plans cannot explore")),
                Action::Build(j) if j < n => {
                    if sites[j].build.is_some() {
                        return Err(bad("site already built"));
                    }
                    sites[j].build = Some(t);
                }
                Action::Restore(j) if j < n => {
                    if sites[j].build.is_none() || sites[j].restore.is_some() {
                        return Err(bad("site is not operating"));
                    }
                    sites[j].restore = Some(t);
                }
                _ => return Err(bad("site out of range")),
            }
        }
        Ok(sites)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: OpenLoopPlan = serde_json::from_str(text)?;
        if plan.actions.len() != plan.horizon as usize {
            return Err(Error::Domain(format!(
                "plan has {} actions for horizon {}",
                plan.actions.len(),
                plan.horizon
            )));
        }
        Ok(plan)
    }
}

/// Discounted return of `plan` executed from `reserves` with world noise
/// `noise`, stepping the full simulator.
pub fn evaluate_plan(
    plan: &OpenLoopPlan,
    config: &ProblemConfig,
    reserves: &[f64],
    noise: &mut impl Noise,
) -> Result<f64> {
    let mut state = State::initial(reserves.to_vec());
    let mut total = 0.0;
    let mut discount = 1.0;
    for &a in plan.actions.iter().take(config.horizon as usize) {
        let out = step(&state, a, config, noise)?;
        total += discount * out.reward_total;
        discount *= config.discount;
        state = out.next_state;
    }
    Ok(total)
}

/// Pre-drawn exogenous quantities of one planning scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanScenario {
    pub reserves: Vec<f64>,
    /// Demand of the step starting at `t` (year `t + 1`).
    pub demand: Vec<f64>,
    /// Rounded yield draw per site and step.
    pub yields: Vec<Vec<f64>>,
    /// Rounded loss draw per site and step.
    pub losses: Vec<Vec<f64>>,
}

impl PlanScenario {
    /// Draws keyed exactly as the simulator keys them, so a keyed noise
    /// source reproduces the simulator's world for any plan.
    pub fn draw(reserves: Vec<f64>, config: &ProblemConfig, noise: &mut impl Noise) -> Result<Self> {
        let horizon = config.horizon;
        let demand = (0..horizon)
            .map(|t| demand_at(t + 1, config, noise))
            .collect::<Result<Vec<_>>>()?;
        let mut yields = Vec::with_capacity(config.n_sites());
        let mut losses = Vec::with_capacity(config.n_sites());
        for (j, site) in config.sites.iter().enumerate() {
            yields.push(
                (0..horizon)
                    .map(|t| noise.draw(&site.yield_dist, Stream::Yield, j, t).round())
                    .collect(),
            );
            losses.push(if config.has_loss(j) {
                (0..horizon)
                    .map(|t| noise.draw(&site.loss, Stream::Loss, j, t).round())
                    .collect()
            } else {
                vec![0.0; horizon as usize]
            });
        }
        Ok(PlanScenario {
            reserves,
            demand,
            yields,
            losses,
        })
    }

    /// Every random quantity at its mean.
    pub fn certainty_equivalent(reserves: Vec<f64>, config: &ProblemConfig) -> Result<Self> {
        Self::draw(reserves, config, &mut MeanNoise)
    }
}

/// Sample-average objective over a fixed scenario set.
pub struct PlanModel<'a> {
    config: &'a ProblemConfig,
    scenarios: Vec<PlanScenario>,
    powers: Vec<f64>,
}

const IMPROVE_TOL: f64 = 1e-9;

impl<'a> PlanModel<'a> {
    pub fn new(config: &'a ProblemConfig, scenarios: Vec<PlanScenario>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::Domain("plan model needs at least one scenario".into()));
        }
        let powers = (0..config.horizon)
            .scan(1.0, |g, _| {
                let cur = *g;
                *g *= config.discount;
                Some(cur)
            })
            .collect();
        Ok(PlanModel {
            config,
            scenarios,
            powers,
        })
    }

    fn horizon(&self) -> usize {
        self.config.horizon as usize
    }

    fn n_sites(&self) -> usize {
        self.config.n_sites()
    }

    /// Step term `-w3 R3 + w4 * revenue` for demand `d` and feed `l`.
    fn market(&self, d: f64, l: f64) -> f64 {
        let w = &self.config.weights;
        let refined = self.config.extraction_factor * l;
        -w[2] * (d - refined).max(0.0) + w[3] * d.min(refined) * self.config.costs.lithium_price
    }

    /// Delivered mass and discounted site-local reward per step when site
    /// `j` is built at `b` and never restored.
    fn site_series(&self, s: &PlanScenario, j: usize, b: u32, feed: &mut [f64], local: &mut [f64]) {
        let c = self.config;
        let w = &c.weights;
        let site = &c.sites[j];
        let per_mass = site.transport_cost + c.costs.processing;
        let mut remaining = s.reserves[j].max(0.0);
        for t in 0..self.horizon() {
            if t as u32 <= b {
                feed[t] = 0.0;
                local[t] = 0.0;
                continue;
            }
            let e = s.yields[j][t].clamp(0.0, remaining);
            remaining = (remaining - e).max(0.0);
            let z = if c.has_loss(j) {
                (e - s.losses[j][t].clamp(0.0, e)).max(0.0)
            } else {
                e
            };
            feed[t] = z;
            local[t] = self.powers[t]
                * (-w[1] * c.emission_scale * site.emission_factor * e
                    - w[3] * (c.costs.operating + per_mass * z));
        }
    }

    fn build_term(&self, j: usize, b: u32) -> f64 {
        let c = self.config;
        let r1 = if c.is_domestic(j) && b < c.delay_goal {
            c.costs.domestic_penalty
        } else {
            0.0
        };
        self.powers[b as usize] * (-c.weights[0] * r1 - c.weights[3] * c.costs.build)
    }

    fn restore_term(&self, j: usize, r: u32) -> f64 {
        let c = self.config;
        self.powers[r as usize]
            * (c.weights[1] * c.sites[j].restore_absorption - c.weights[3] * c.costs.restore)
    }

    /// Sample-average discounted objective of a per-site plan.
    pub fn objective(&self, plans: &[SitePlan]) -> f64 {
        let h = self.horizon();
        let mut feed = vec![0.0; h];
        let mut local = vec![0.0; h];
        let mut total = 0.0;
        for s in &self.scenarios {
            let mut l = vec![0.0; h];
            let mut value = 0.0;
            for (j, p) in plans.iter().enumerate() {
                let Some(b) = p.build else { continue };
                value += self.build_term(j, b);
                self.site_series(s, j, b, &mut feed, &mut local);
                let last = p.restore.map_or(h - 1, |r| r as usize);
                if let Some(r) = p.restore {
                    value += self.restore_term(j, r);
                }
                for t in (b as usize + 1)..=last.min(h - 1) {
                    l[t] += feed[t];
                    value += local[t];
                }
            }
            for t in 0..h {
                value += self.powers[t] * self.market(s.demand[t], l[t]);
            }
            total += value;
        }
        total / self.scenarios.len() as f64
    }

    /// Candidate build years for site `j`: domestic sites are listed
    /// latest first so that ties keep the later build.
    fn build_options(&self, j: usize) -> Vec<Option<u32>> {
        let h = self.config.horizon;
        if self.config.is_domestic(j) {
            std::iter::once(None).chain((0..h).rev().map(Some)).collect()
        } else {
            (0..h).map(Some).chain(std::iter::once(None)).collect()
        }
    }

    /// Best plan for site `j` with every other site fixed. Returns the plan
    /// and its gain over leaving site `j` unbuilt.
    fn best_site_plan(&self, plans: &[SitePlan], j: usize) -> (SitePlan, f64) {
        let h = self.horizon();
        let mut used = vec![false; h];
        for (k, p) in plans.iter().enumerate() {
            if k == j {
                continue;
            }
            for y in [p.build, p.restore].into_iter().flatten() {
                used[y as usize] = true;
            }
        }

        // feed from the other sites, per scenario
        let mut feed = vec![0.0; h];
        let mut local = vec![0.0; h];
        let mut others: Vec<Vec<f64>> = Vec::with_capacity(self.scenarios.len());
        for s in &self.scenarios {
            let mut l = vec![0.0; h];
            for (k, p) in plans.iter().enumerate() {
                if k == j {
                    continue;
                }
                let Some(b) = p.build else { continue };
                self.site_series(s, k, b, &mut feed, &mut local);
                let last = p.restore.map_or(h - 1, |r| r as usize);
                for t in (b as usize + 1)..=last {
                    l[t] += feed[t];
                }
            }
            others.push(l);
        }

        let current = self.site_gain(plans[j], j, &others);
        let mut best = (plans[j], current);
        let inv_n = 1.0 / self.scenarios.len() as f64;
        let mut gain_by_step = vec![0.0; h];
        for b in self.build_options(j) {
            let Some(b) = b else {
                if 0.0 > best.1 + IMPROVE_TOL * best.1.abs().max(1.0) {
                    best = (SitePlan::default(), 0.0);
                }
                continue;
            };
            if used[b as usize] {
                continue;
            }
            gain_by_step.iter_mut().for_each(|g| *g = 0.0);
            for (s, other) in self.scenarios.iter().zip(&others) {
                self.site_series(s, j, b, &mut feed, &mut local);
                for t in (b as usize + 1)..h {
                    let d = s.demand[t];
                    gain_by_step[t] += local[t]
                        + self.powers[t] * (self.market(d, other[t] + feed[t]) - self.market(d, other[t]));
                }
            }
            let base = self.build_term(j, b);
            // never restore first, then restores in year order
            let mut prefix = vec![0.0; h];
            let mut acc = 0.0;
            for t in 0..h {
                acc += gain_by_step[t] * inv_n;
                prefix[t] = acc;
            }
            let mut consider = |plan: SitePlan, value: f64| {
                if value > best.1 + IMPROVE_TOL * best.1.abs().max(1.0) {
                    best = (plan, value);
                }
            };
            consider(
                SitePlan {
                    build: Some(b),
                    restore: None,
                },
                base + prefix[h - 1],
            );
            for r in (b + 1)..self.config.horizon {
                if used[r as usize] {
                    continue;
                }
                consider(
                    SitePlan {
                        build: Some(b),
                        restore: Some(r),
                    },
                    base + self.restore_term(j, r) + prefix[r as usize],
                );
            }
        }
        best
    }

    /// Gain of `plan` for site `j` over leaving it unbuilt, given the other
    /// sites' feed.
    fn site_gain(&self, plan: SitePlan, j: usize, others: &[Vec<f64>]) -> f64 {
        let Some(b) = plan.build else { return 0.0 };
        let h = self.horizon();
        let last = plan.restore.map_or(h - 1, |r| r as usize);
        let mut feed = vec![0.0; h];
        let mut local = vec![0.0; h];
        let mut total = 0.0;
        for (s, other) in self.scenarios.iter().zip(others) {
            self.site_series(s, j, b, &mut feed, &mut local);
            for t in (b as usize + 1)..=last {
                let d = s.demand[t];
                total += local[t]
                    + self.powers[t] * (self.market(d, other[t] + feed[t]) - self.market(d, other[t]));
            }
        }
        let mut value = self.build_term(j, b) + total / self.scenarios.len() as f64;
        if let Some(r) = plan.restore {
            value += self.restore_term(j, r);
        }
        value
    }

    /// Coordinate ascent over sites until no site plan strictly improves.
    pub fn refine(&self, mut plans: Vec<SitePlan>) -> Vec<SitePlan> {
        for _ in 0..100 {
            let mut changed = false;
            for j in 0..self.n_sites() {
                let (p, _) = self.best_site_plan(&plans, j);
                if p != plans[j] {
                    plans[j] = p;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        plans
    }

    /// Exhaustive search over joint build years (never restoring), when the
    /// joint space is small enough.
    pub fn best_build_years(&self) -> Option<Vec<SitePlan>> {
        let n = self.n_sites();
        let h = self.horizon();
        let options: Vec<Vec<Option<u32>>> = (0..n).map(|j| self.build_options(j)).collect();
        let size = options.iter().map(|o| o.len() as f64).product::<f64>();
        if size * self.scenarios.len() as f64 > 5e6 {
            return None;
        }

        // per scenario, site, option: feed series and summed local reward
        let mut feeds = Vec::new();
        let mut locals = Vec::new();
        for s in &self.scenarios {
            let mut f_s = Vec::with_capacity(n);
            let mut l_s = Vec::with_capacity(n);
            for (j, opts) in options.iter().enumerate() {
                let mut f_j = Vec::with_capacity(opts.len());
                let mut l_j = Vec::with_capacity(opts.len());
                for o in opts {
                    let mut feed = vec![0.0; h];
                    let mut local = vec![0.0; h];
                    let mut value = 0.0;
                    if let Some(b) = *o {
                        self.site_series(s, j, b, &mut feed, &mut local);
                        value = self.build_term(j, b) + local.iter().sum::<f64>();
                    }
                    f_j.push(feed);
                    l_j.push(value);
                }
                f_s.push(f_j);
                l_s.push(l_j);
            }
            feeds.push(f_s);
            locals.push(l_s);
        }

        let mut idx = vec![0usize; n];
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut l = vec![0.0; h];
        loop {
            let years: Vec<u32> = (0..n).filter_map(|j| options[j][idx[j]]).collect();
            let distinct = {
                let mut y = years.clone();
                y.sort_unstable();
                y.windows(2).all(|w| w[0] != w[1])
            };
            if distinct {
                let mut total = 0.0;
                for (si, s) in self.scenarios.iter().enumerate() {
                    l.iter_mut().for_each(|x| *x = 0.0);
                    for j in 0..n {
                        total += locals[si][j][idx[j]];
                        for (acc, f) in l.iter_mut().zip(&feeds[si][j][idx[j]]) {
                            *acc += f;
                        }
                    }
                    for t in 0..h {
                        total += self.powers[t] * self.market(s.demand[t], l[t]);
                    }
                }
                total /= self.scenarios.len() as f64;
                let better = best
                    .as_ref()
                    .is_none_or(|(v, _)| total > v + IMPROVE_TOL * v.abs().max(1.0));
                if better {
                    best = Some((total, idx.clone()));
                }
            }
            // odometer, last site fastest
            let mut k = n;
            loop {
                if k == 0 {
                    let (_, idx) = best?;
                    return Some(
                        (0..n)
                            .map(|j| SitePlan {
                                build: options[j][idx[j]],
                                restore: None,
                            })
                            .collect(),
                    );
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < options[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Best of several refined starting plans; earlier seeds win ties.
    pub fn optimize(&self, seeds: Vec<Vec<SitePlan>>) -> (Vec<SitePlan>, f64) {
        let mut best: Option<(Vec<SitePlan>, f64)> = None;
        for seed in seeds {
            let plans = self.refine(seed);
            let value = self.objective(&plans);
            let better = best
                .as_ref()
                .is_none_or(|(_, v)| value > v + IMPROVE_TOL * v.abs().max(1.0));
            if better {
                best = Some((plans, value));
            }
        }
        best.unwrap_or_else(|| {
            let idle = vec![SitePlan::default(); self.n_sites()];
            let v = self.objective(&idle);
            (idle, v)
        })
    }
}

/// The plan a non-exploring policy would follow, obtained by running it on
/// the belief alone.
pub fn induced_plan(
    policy: &mut dyn Policy,
    config: &ProblemConfig,
    belief: &Belief,
    rng: &mut PolicyRng,
) -> Result<OpenLoopPlan> {
    let mut b = belief.clone();
    let mut plan = OpenLoopPlan::idle(config.horizon);
    let none = crate::domain::Observation::none(config.n_sites());
    for t in 0..config.horizon {
        let a = policy.act(config, &b, rng)?;
        if a.is_explore() {
            return Err(Error::Domain(format!("{} explores; no open-loop plan", policy.name())));
        }
        plan.actions[t as usize] = a;
        let mut next = b.observables.clone();
        match a {
            Action::Build(j) => {
                next.operating[j] = true;
                next.built[j] = true;
            }
            Action::Restore(j) => next.operating[j] = false,
            _ => {}
        }
        next.t = t + 1;
        b = b.update(a, &none, &next, config)?;
    }
    Ok(plan)
}

fn heuristic_seeds(config: &ProblemConfig, belief: &Belief) -> Result<Vec<Vec<SitePlan>>> {
    struct Rule(fn(&[f64], &crate::domain::Observables, &ProblemConfig) -> Action);
    impl Policy for Rule {
        fn name(&self) -> &str {
            "rule"
        }
        fn act(&mut self, c: &ProblemConfig, b: &Belief, _: &mut PolicyRng) -> Result<Action> {
            Ok((self.0)(&b.mean, &b.observables, c))
        }
    }
    let n = config.n_sites();
    let mut rng = PolicyRng::seed_from_u64(0);
    let mut seeds = Vec::new();
    for rule in [greedy_action, import_only_action] {
        let plan = induced_plan(&mut Rule(rule), config, belief, &mut rng)?;
        seeds.push(plan.site_plans(n)?);
    }
    seeds.push(vec![SitePlan::default(); n]);
    Ok(seeds)
}

/// Certainty-equivalent optimum: reserves at the belief means and every
/// random quantity at its mean.
pub fn plan_open_loop_deterministic(belief: &Belief, config: &ProblemConfig) -> Result<OpenLoopPlan> {
    let scenario = PlanScenario::certainty_equivalent(belief.mean.clone(), config)?;
    let model = PlanModel::new(config, vec![scenario])?;
    let mut seeds = Vec::new();
    if let Some(p) = model.best_build_years() {
        seeds.push(p);
    }
    seeds.extend(heuristic_seeds(config, belief)?);
    let (plans, value) = model.optimize(seeds);
    let mut plan = OpenLoopPlan::from_sites(&plans, config.horizon);
    plan.objective = Some(value);
    Ok(plan)
}

/// Sample-average optimum over `n` scenarios whose reserves come from the
/// belief and whose demand, yield and loss noise is drawn afresh.
pub fn plan_open_loop_stochastic<R: Rng + ?Sized>(
    belief: &Belief,
    config: &ProblemConfig,
    n: usize,
    rng: &mut R,
) -> Result<OpenLoopPlan> {
    if n == 0 {
        return Err(Error::Domain("scenario count must be at least 1".into()));
    }
    let base: u64 = rng.random();
    let scenarios = (0..n)
        .map(|k| {
            let reserves = belief.sample_state(config, rng).reserves;
            PlanScenario::draw(reserves, config, &mut CrnNoise::new(mix_seed(&[base, k as u64])))
        })
        .collect::<Result<Vec<_>>>()?;
    stochastic_from_scenarios(belief, config, scenarios)
}

/// The sample-average optimizer on a given scenario set.
pub fn stochastic_from_scenarios(
    belief: &Belief,
    config: &ProblemConfig,
    scenarios: Vec<PlanScenario>,
) -> Result<OpenLoopPlan> {
    let ce = plan_open_loop_deterministic(belief, config)?;
    let model = PlanModel::new(config, scenarios)?;
    let mut seeds = vec![ce.site_plans(config.n_sites())?];
    seeds.extend(heuristic_seeds(config, belief)?);
    let (plans, value) = model.optimize(seeds);
    let mut plan = OpenLoopPlan::from_sites(&plans, config.horizon);
    plan.objective = Some(value);
    Ok(plan)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    Deterministic,
    Stochastic(usize),
    Fixed,
}

/// Executes an open-loop plan computed at the start of each episode.
pub struct OpenLoopPolicy {
    mode: Mode,
    plan: Option<OpenLoopPlan>,
    cache_key: Option<(Vec<f64>, Vec<f64>)>,
}

impl OpenLoopPolicy {
    pub fn deterministic() -> Self {
        OpenLoopPolicy {
            mode: Mode::Deterministic,
            plan: None,
            cache_key: None,
        }
    }

    pub fn stochastic(scenarios: usize) -> Self {
        OpenLoopPolicy {
            mode: Mode::Stochastic(scenarios),
            plan: None,
            cache_key: None,
        }
    }

    /// A fixed plan replayed as is.
    pub fn fixed(plan: OpenLoopPlan) -> Self {
        OpenLoopPolicy {
            mode: Mode::Fixed,
            plan: Some(plan),
            cache_key: None,
        }
    }

    pub fn plan(&self) -> Option<&OpenLoopPlan> {
        self.plan.as_ref()
    }
}

impl Policy for OpenLoopPolicy {
    fn name(&self) -> &str {
        match self.mode {
            Mode::Deterministic => "deterministic",
            Mode::Stochastic(_) => "stochastic",
            Mode::Fixed => "replay",
        }
    }

    fn begin_episode(
        &mut self,
        config: &ProblemConfig,
        belief: &Belief,
        rng: &mut PolicyRng,
    ) -> Result<()> {
        match self.mode {
            Mode::Deterministic => {
                let key = (belief.mean.clone(), belief.std.clone());
                if self.plan.is_none() || self.cache_key.as_ref().is_some_and(|k| *k != key) {
                    self.plan = Some(plan_open_loop_deterministic(belief, config)?);
                    self.cache_key = Some(key);
                }
            }
            Mode::Stochastic(n) => {
                self.plan = Some(plan_open_loop_stochastic(belief, config, n, rng)?);
            }
            Mode::Fixed => {}
        }
        Ok(())
    }

    fn act(&mut self, _: &ProblemConfig, belief: &Belief, _: &mut PolicyRng) -> Result<Action> {
        let plan = self
            .plan
            .as_ref()
            .ok_or_else(|| Error::Contract("open-loop plan used before begin_episode".into()))?;
        let t = belief.observables.t as usize;
        let a = plan.actions.get(t).copied().unwrap_or(Action::DoNothing);
        let obs = &belief.observables;
        if !crate::domain::is_valid(a, &obs.operating, &obs.built) {
            return Err(Error::InvalidAction { action: a, t: obs.t });
        }
        Ok(a)
    }
}
