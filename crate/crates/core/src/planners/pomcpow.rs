//! Progressive-widening Monte Carlo tree search over beliefs.
//!
//! Each observation child holds a weighted particle set of successor states
//! (weights are observation likelihoods). Once an action node has as many
//! observation children as `k_obs * N^alpha_obs`, new simulations are routed
//! to an existing child chosen by visit share and continue from a particle
//! drawn from that child's set.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use super::{
    best_root, ensure_actions, rollout, ActionStat, PlannerConfig, RootSampler, SearchReport,
};
use crate::baselines::{Policy, PolicyRng};
use crate::config::ProblemConfig;
use crate::dist::RngNoise;
use crate::domain::{Action, State};
use crate::dynamics::{observation_probability, step_in_place};
use crate::error::Result;
use crate::Belief;

struct BeliefNode {
    visits: u32,
    /// Action node ids, created on the first visit.
    children: Vec<usize>,
}

struct ObsChild {
    reading: Option<f64>,
    count: u32,
    node: usize,
    particles: Vec<(State, f64)>,
    weights: Vec<f64>,
    weight_sum: f64,
}

struct ActionNode {
    action: Action,
    visits: u32,
    value: f64,
    children: Vec<ObsChild>,
}

struct Tree<'a> {
    config: &'a ProblemConfig,
    params: &'a PlannerConfig,
    beliefs: Vec<BeliefNode>,
    actions: Vec<ActionNode>,
}

impl<'a> Tree<'a> {
    fn new_belief(&mut self) -> usize {
        self.beliefs.push(BeliefNode {
            visits: 0,
            children: Vec::new(),
        });
        self.beliefs.len() - 1
    }

    fn select(&mut self, node: usize, state: &State) -> usize {
        if self.beliefs[node].children.is_empty() {
            for a in state.valid_actions() {
                self.actions.push(ActionNode {
                    action: a,
                    visits: 0,
                    value: 0.0,
                    children: Vec::new(),
                });
                let id = self.actions.len() - 1;
                self.beliefs[node].children.push(id);
            }
        }
        let b = &self.beliefs[node];
        if let Some(&id) = b.children.iter().find(|&&id| self.actions[id].visits == 0) {
            return id;
        }
        let log_n = (b.visits.max(1) as f64).ln();
        let mut best = (f64::NEG_INFINITY, b.children[0]);
        for &id in &b.children {
            let a = &self.actions[id];
            let score = a.value + self.params.ucb * (log_n / a.visits as f64).sqrt();
            if score > best.0 {
                best = (score, id);
            }
        }
        best.1
    }

    fn rollout(&self, state: State, rng: &mut SmallRng) -> f64 {
        let mut world = SmallRng::seed_from_u64(rng.random());
        rollout(state, self.config, self.params.rollout, &mut RngNoise(&mut world), rng)
    }

    fn likelihood(&self, action: Action, reading: Option<f64>, next: &State) -> f64 {
        match (action, reading) {
            (Action::Explore(j), Some(o)) => observation_probability(o, next.reserves[j], self.config),
            _ => 1.0,
        }
    }

    fn simulate(&mut self, state: &State, node: usize, depth: u32, rng: &mut SmallRng) -> f64 {
        let config = self.config;
        if state.t >= config.horizon {
            return 0.0;
        }
        if depth == 0 {
            return self.rollout(state.clone(), rng);
        }
        let aid = self.select(node, state);
        let action = self.actions[aid].action;
        let mut next = state.clone();
        let (r, reading) = step_in_place(&mut next, action, config, &mut RngNoise(&mut *rng))
            .expect("tree actions are valid");

        let limit = self.params.k_obs * (self.actions[aid].visits.max(1) as f64).powf(self.params.alpha_obs);
        let an = &mut self.actions[aid];
        let existing = an.children.iter().position(|c| c.reading == reading);
        let widen = an.children.len() as f64 <= limit;
        let (ci, fresh, own) = if widen {
            match existing {
                Some(ci) => (ci, false, true),
                None => {
                    an.children.push(ObsChild {
                        reading,
                        count: 0,
                        node: usize::MAX,
                        particles: Vec::new(),
                        weights: Vec::new(),
                        weight_sum: 0.0,
                    });
                    (an.children.len() - 1, true, true)
                }
            }
        } else {
            let total: u32 = an.children.iter().map(|c| c.count).sum();
            let mut pick = rng.random_range(0..total.max(1));
            let mut ci = 0;
            for (i, c) in an.children.iter().enumerate() {
                if pick < c.count {
                    ci = i;
                    break;
                }
                pick -= c.count;
            }
            (ci, false, an.children[ci].reading == reading)
        };
        if fresh {
            let id = self.new_belief();
            self.actions[aid].children[ci].node = id;
        }
        let child_reading = self.actions[aid].children[ci].reading;
        let w = self.likelihood(action, child_reading, &next);
        {
            let child = &mut self.actions[aid].children[ci];
            child.count += 1;
            child.particles.push((next.clone(), r));
            child.weights.push(w);
            child.weight_sum += w;
        }

        let child_node = self.actions[aid].children[ci].node;
        let gamma = config.discount;
        let total = if fresh {
            r + gamma * self.rollout(next, rng)
        } else if own {
            r + gamma * self.simulate(&next, child_node, depth - 1, rng)
        } else {
            let (s2, r2) = {
                let child = &self.actions[aid].children[ci];
                let mut u = rng.random::<f64>() * child.weight_sum;
                let mut k = child.particles.len() - 1;
                for (i, w) in child.weights.iter().enumerate() {
                    if u < *w {
                        k = i;
                        break;
                    }
                    u -= w;
                }
                child.particles[k].clone()
            };
            r2 + gamma * self.simulate(&s2, child_node, depth - 1, rng)
        };

        self.beliefs[node].visits += 1;
        let an = &mut self.actions[aid];
        an.visits += 1;
        an.value += (total - an.value) / an.visits as f64;
        total
    }
}

/// Run one search from `root` and report root statistics.
pub(crate) fn search(
    root: &dyn RootSampler,
    config: &ProblemConfig,
    params: &PlannerConfig,
    rng: &mut SmallRng,
) -> Result<SearchReport> {
    params.check()?;
    let obs = root.observables();
    ensure_actions(obs)?;
    let mut tree = Tree {
        config,
        params,
        beliefs: Vec::new(),
        actions: Vec::new(),
    };
    let root_id = tree.new_belief();
    if obs.t >= config.horizon {
        return Err(crate::error::Error::EpisodeOver { t: obs.t });
    }
    for _ in 0..params.iterations {
        let s = root.sample(config, rng);
        tree.simulate(&s, root_id, params.max_depth, rng);
    }
    let stats: Vec<ActionStat> = tree.beliefs[root_id]
        .children
        .iter()
        .map(|&id| {
            let a = &tree.actions[id];
            ActionStat {
                action: a.action,
                visits: a.visits,
                value: a.value,
            }
        })
        .collect();
    let (action, value) = best_root(&stats).expect("at least one iteration ran");
    Ok(SearchReport {
        planner: "pomcpow".into(),
        t: obs.t,
        action,
        value,
        iterations: params.iterations,
        root: stats,
    })
}

/// Best root action after a progressive-widening search.
pub fn plan_pomcpow(
    belief: &Belief,
    config: &ProblemConfig,
    params: &PlannerConfig,
    rng: &mut SmallRng,
) -> Result<Action> {
    Ok(search(belief, config, params, rng)?.action)
}

pub struct PomcpowPlanner {
    params: PlannerConfig,
    reports: Vec<SearchReport>,
}

impl PomcpowPlanner {
    pub fn new(params: PlannerConfig) -> Self {
        PomcpowPlanner {
            params,
            reports: Vec::new(),
        }
    }

    pub fn params(&self) -> &PlannerConfig {
        &self.params
    }

    /// Search with an arbitrary root distribution.
    pub fn search(
        &self,
        root: &dyn RootSampler,
        config: &ProblemConfig,
        rng: &mut SmallRng,
    ) -> Result<SearchReport> {
        search(root, config, &self.params, rng)
    }

    pub fn reports(&self) -> &[SearchReport] {
        &self.reports
    }
}

impl Policy for PomcpowPlanner {
    fn name(&self) -> &str {
        "pomcpow"
    }

    fn begin_episode(&mut self, _: &ProblemConfig, _: &Belief, _: &mut PolicyRng) -> Result<()> {
        self.reports.clear();
        Ok(())
    }

    fn act(&mut self, config: &ProblemConfig, belief: &Belief, rng: &mut PolicyRng) -> Result<Action> {
        let mut srng = self.params.decision_rng(belief.observables.t, rng);
        let report = search(belief, config, &self.params, &mut srng)?;
        let action = report.action;
        if self.params.record {
            self.reports.push(report);
        }
        Ok(action)
    }
}
