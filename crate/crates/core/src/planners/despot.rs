//! Determinized sparse tree search.
//!
//! `K` scenarios are fixed up front, each a root state plus a seed that
//! determines every demand, yield, loss and measurement draw along any action
//! sequence. A node holds the scenarios consistent with its observation
//! history; an action edge steps all of them and groups the successors by
//! observation. Trials descend by UCB over actions and sample observation
//! branches in proportion to their scenario counts, expanding one new edge
//! per trial. Values back up as
//! `Q(b, a) = mean reward + gamma * sum_o (|Phi_o| / |Phi|) V(b_o)`.

use rand::rngs::SmallRng;
use rand::Rng;

use super::{
    best_root, ensure_actions, rollout, ActionStat, PlannerConfig, RootSampler, SearchReport,
};
use crate::baselines::{Policy, PolicyRng};
use crate::config::ProblemConfig;
use crate::dist::ScenarioNoise;
use crate::domain::{Action, State};
use crate::dynamics::step_in_place;
use crate::error::{Error, Result};
use crate::Belief;

struct Node {
    /// (scenario seed, state) pairs reaching this node.
    scenarios: Vec<(u64, State)>,
    actions: Vec<Action>,
    edges: Vec<Option<Edge>>,
    visits: u32,
    value: f64,
}

struct Edge {
    visits: u32,
    mean_reward: f64,
    /// (child node, share of this node's scenarios)
    children: Vec<(usize, f64)>,
    q: f64,
}

struct Tree<'a> {
    config: &'a ProblemConfig,
    params: &'a PlannerConfig,
    nodes: Vec<Node>,
}

impl<'a> Tree<'a> {
    fn new_node(&mut self, scenarios: Vec<(u64, State)>, rng: &mut SmallRng) -> usize {
        let config = self.config;
        let value = if scenarios.first().is_none_or(|(_, s)| s.t >= config.horizon) {
            0.0
        } else {
            scenarios
                .iter()
                .map(|(seed, s)| {
                    rollout(s.clone(), config, self.params.rollout, &mut ScenarioNoise { seed: *seed }, rng)
                })
                .sum::<f64>()
                / scenarios.len() as f64
        };
        let actions = scenarios
            .first()
            .map(|(_, s)| s.valid_actions())
            .unwrap_or_default();
        let edges = actions.iter().map(|_| None).collect();
        self.nodes.push(Node {
            scenarios,
            actions,
            edges,
            visits: 0,
            value,
        });
        self.nodes.len() - 1
    }

    fn expand(&mut self, node: usize, k: usize, rng: &mut SmallRng) {
        let action = self.nodes[node].actions[k];
        let n = self.nodes[node].scenarios.len() as f64;
        let mut groups: Vec<(Option<f64>, Vec<(u64, State)>)> = Vec::new();
        let mut reward = 0.0;
        for (seed, s) in &self.nodes[node].scenarios {
            let mut next = s.clone();
            let (r, reading) = step_in_place(&mut next, action, self.config, &mut ScenarioNoise { seed: *seed })
                .expect("tree actions are valid");
            reward += r;
            match groups.iter_mut().find(|(o, _)| *o == reading) {
                Some((_, g)) => g.push((*seed, next)),
                None => groups.push((reading, vec![(*seed, next)])),
            }
        }
        let mut children = Vec::with_capacity(groups.len());
        for (_, g) in groups {
            let share = g.len() as f64 / n;
            let id = self.new_node(g, rng);
            children.push((id, share));
        }
        let mut edge = Edge {
            visits: 0,
            mean_reward: reward / n,
            children,
            q: 0.0,
        };
        edge.q = self.edge_value(&edge);
        self.nodes[node].edges[k] = Some(edge);
    }

    fn edge_value(&self, edge: &Edge) -> f64 {
        edge.mean_reward
            + self.config.discount
                * edge
                    .children
                    .iter()
                    .map(|&(c, w)| w * self.nodes[c].value)
                    .sum::<f64>()
    }

    /// Index of the action to follow: first unexpanded, else UCB.
    fn select(&self, node: usize) -> usize {
        let nd = &self.nodes[node];
        if let Some(k) = nd.edges.iter().position(Option::is_none) {
            return k;
        }
        let log_n = (nd.visits.max(1) as f64).ln();
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, e) in nd.edges.iter().enumerate() {
            let e = e.as_ref().expect("all expanded");
            let score = e.q + self.params.ucb * (log_n / e.visits.max(1) as f64).sqrt();
            if score > best.0 {
                best = (score, k);
            }
        }
        best.1
    }

    fn trial(&mut self, root: usize, rng: &mut SmallRng) {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut node = root;
        let mut depth = 0;
        loop {
            let nd = &self.nodes[node];
            let terminal = nd.scenarios.first().is_none_or(|(_, s)| s.t >= self.config.horizon);
            if terminal || depth >= self.params.max_depth || nd.actions.is_empty() {
                break;
            }
            let k = self.select(node);
            path.push((node, k));
            if self.nodes[node].edges[k].is_none() {
                self.expand(node, k, rng);
                break;
            }
            let edge = self.nodes[node].edges[k].as_ref().unwrap();
            let mut u = rng.random::<f64>();
            let mut next = edge.children.last().unwrap().0;
            for &(c, w) in &edge.children {
                if u < w {
                    next = c;
                    break;
                }
                u -= w;
            }
            node = next;
            depth += 1;
        }
        for &(node, k) in path.iter().rev() {
            let mut edge = self.nodes[node].edges[k].take().unwrap();
            edge.visits += 1;
            edge.q = self.edge_value(&edge);
            self.nodes[node].edges[k] = Some(edge);
            let nd = &mut self.nodes[node];
            nd.visits += 1;
            nd.value = nd
                .edges
                .iter()
                .flatten()
                .map(|e| e.q)
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
}

pub(crate) fn search(
    root: &dyn RootSampler,
    config: &ProblemConfig,
    params: &PlannerConfig,
    rng: &mut SmallRng,
) -> Result<SearchReport> {
    params.check()?;
    let obs = root.observables();
    ensure_actions(obs)?;
    if obs.t >= config.horizon {
        return Err(Error::EpisodeOver { t: obs.t });
    }
    let scenarios: Vec<(u64, State)> = (0..params.scenarios)
        .map(|_| {
            let s = root.sample(config, rng);
            (rng.random::<u64>(), s)
        })
        .collect();
    let mut tree = Tree {
        config,
        params,
        nodes: Vec::new(),
    };
    let root_id = tree.new_node(scenarios, rng);
    for _ in 0..params.iterations {
        tree.trial(root_id, rng);
    }
    let nd = &tree.nodes[root_id];
    let stats: Vec<ActionStat> = nd
        .actions
        .iter()
        .zip(&nd.edges)
        .map(|(&action, e)| ActionStat {
            action,
            visits: e.as_ref().map_or(0, |e| e.visits),
            value: e.as_ref().map_or(f64::NAN, |e| e.q),
        })
        .collect();
    let (action, value) = best_root(&stats).expect("at least one trial ran");
    Ok(SearchReport {
        planner: "despot".into(),
        t: obs.t,
        action,
        value,
        iterations: params.iterations,
        root: stats,
    })
}

/// Best root action of a determinized sparse search.
pub fn plan_despot(
    belief: &Belief,
    config: &ProblemConfig,
    params: &PlannerConfig,
    rng: &mut SmallRng,
) -> Result<Action> {
    Ok(search(belief, config, params, rng)?.action)
}

pub struct DespotPlanner {
    params: PlannerConfig,
    reports: Vec<SearchReport>,
}

impl DespotPlanner {
    pub fn new(params: PlannerConfig) -> Self {
        DespotPlanner {
            params,
            reports: Vec::new(),
        }
    }

    pub fn params(&self) -> &PlannerConfig {
        &self.params
    }

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

impl Policy for DespotPlanner {
    fn name(&self) -> &str {
        "despot"
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
