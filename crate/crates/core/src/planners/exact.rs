//! Exact expectimax over the belief MDP of tiny discretized instances.
//!
//! Beliefs are finite distributions over reserve vectors; every demand,
//! yield and loss distribution must have finite support and readings are
//! confined to a handful of bins by `obs_cap`. The value of every reachable
//! belief is memoized.

use std::collections::HashMap;

use rand::rngs::SmallRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::RootSampler;
use crate::config::{DemandBand, ProblemConfig};
use crate::dist::Dist;
use crate::domain::{round_to_bin, valid_actions_for, Action, Observables, State};
use crate::dynamics::{observation_probability, reward, transition};
use crate::error::{Error, Result};

pub const MAX_SITES: usize = 2;
pub const MAX_HORIZON: u32 = 4;
pub const MAX_RESERVE_BINS: usize = 5;
pub const MAX_OBS_BINS: usize = 5;

/// Independent finite prior per site.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePrior {
    /// `(reserve, probability)` pairs per site.
    pub sites: Vec<Vec<(f64, f64)>>,
    pub observables: Observables,
}

impl DiscretePrior {
    pub fn new(sites: Vec<Vec<(f64, f64)>>) -> Self {
        let n = sites.len();
        DiscretePrior {
            sites,
            observables: Observables::initial(n),
        }
    }

    /// Joint support as `(reserves, probability)`.
    pub fn joint(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = vec![(Vec::new(), 1.0)];
        for site in &self.sites {
            let mut next = Vec::with_capacity(out.len() * site.len());
            for (v, p) in &out {
                for &(x, q) in site {
                    let mut w = v.clone();
                    w.push(x);
                    next.push((w, p * q));
                }
            }
            out = next;
        }
        out
    }
}

impl RootSampler for DiscretePrior {
    fn observables(&self) -> &Observables {
        &self.observables
    }

    fn sample(&self, _config: &ProblemConfig, rng: &mut SmallRng) -> State {
        let reserves = self
            .sites
            .iter()
            .map(|site| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in site {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                site.last().map_or(0.0, |x| x.0)
            })
            .collect();
        State::with_observables(reserves, &self.observables)
    }
}

#[derive(Clone, Debug)]
pub struct TinyInstance {
    pub config: ProblemConfig,
    pub prior: DiscretePrior,
}

impl TinyInstance {
    /// Checks the size limits and finite supports; refuses anything larger.
    pub fn new(config: ProblemConfig, prior: DiscretePrior) -> Result<Self> {
        let too_big = |msg: String| Err(Error::InstanceTooLarge(msg));
        let n = config.n_sites();
        if n > MAX_SITES {
            return too_big(format!("{n} sites (limit {MAX_SITES})"));
        }
        if config.horizon > MAX_HORIZON {
            return too_big(format!("horizon {} (limit {MAX_HORIZON})", config.horizon));
        }
        if prior.sites.len() != n {
            return Err(Error::Domain(format!("prior has {} sites, config {n}", prior.sites.len())));
        }
        for (j, s) in prior.sites.iter().enumerate() {
            if s.is_empty() || s.len() > MAX_RESERVE_BINS {
                return too_big(format!(
                    "site {} prior has {} reserve bins (limit {MAX_RESERVE_BINS})",
                    j + 1,
                    s.len()
                ));
            }
        }
        match config.obs_cap {
            None => return too_big("observation space is unbounded; set obs_cap".into()),
            Some(cap) => {
                let bins = (round_to_bin(cap, config.obs_bin) / config.obs_bin).round() as usize + 1;
                if bins > MAX_OBS_BINS {
                    return too_big(format!("{bins} observation bins (limit {MAX_OBS_BINS})"));
                }
            }
        }
        for (j, s) in config.sites.iter().enumerate() {
            if s.yield_dist.support().is_none() || (config.has_loss(j) && s.loss.support().is_none()) {
                return too_big(format!("site {} needs finite yield and loss supports", j + 1));
            }
        }
        for year in 1..=config.horizon {
            match config.demand_band(year) {
                Some(b) if b.dist.support().is_some() => {}
                _ => return too_big(format!("demand of year {year} needs a finite support")),
            }
        }
        Ok(TinyInstance { config, prior })
    }

    /// Random instance within the size limits: one or two sites, horizon 2
    /// to 4, two or three reserve values per site, two-point yields, losses
    /// and demand, five observation bins.
    pub fn random(seed: u64) -> Self {
        let mut rng = SmallRng::seed_from_u64(seed);
        let base = ProblemConfig::table1();
        let n = rng.random_range(1..=MAX_SITES);
        let horizon = rng.random_range(2..=MAX_HORIZON);
        let mut c = base.clone();
        c.name = format!("tiny-{seed}");
        c.horizon = horizon;
        c.discount = 0.95;
        c.delay_goal = rng.random_range(0..horizon);
        c.reserve_bin = 1000.0;
        c.obs_bin = 2000.0;
        c.obs_cap = Some(8000.0);
        c.obs_noise = [500.0, 1500.0][rng.random_range(0..2)];
        c.costs.build = rng.random_range(5.0..30.0_f64).round();
        c.costs.explore = rng.random_range(0.5..4.0_f64).round();
        c.costs.restore = 5.0;
        c.costs.domestic_penalty = 20.0;
        let two_point = |rng: &mut SmallRng, a: f64, b: f64| {
            let p = (rng.random_range(0.2..0.8_f64) * 10.0).round() / 10.0;
            Dist::Discrete {
                values: vec![a, b],
                probs: vec![p, 1.0 - p],
            }
        };
        c.sites = (0..n)
            .map(|j| {
                let mut s = base.sites[if rng.random_bool(0.5) { 1 } else { 3 }].clone();
                s.name = format!("site-{}", j + 1);
                s.yield_dist = two_point(&mut rng, 1500.0, 2500.0);
                s.loss = two_point(&mut rng, 0.0, 200.0);
                s
            })
            .collect();
        c.demand = vec![DemandBand {
            from_year: 1,
            to_year: horizon,
            dist: two_point(&mut rng, 150.0, 250.0),
        }];
        c.scenarios = None;
        const GRID: [f64; 5] = [0.0, 1000.0, 2000.0, 4000.0, 6000.0];
        let sites: Vec<Vec<(f64, f64)>> = (0..n)
            .map(|_| {
                let k = rng.random_range(2..=3);
                let mut idx: Vec<usize> = (0..GRID.len()).collect();
                idx.shuffle(&mut rng);
                let mut vals: Vec<f64> = idx[..k].iter().map(|&i| GRID[i]).collect();
                vals.sort_by(f64::total_cmp);
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(1..=4) as f64).collect();
                let total: f64 = w.iter().sum();
                vals.into_iter().zip(w).map(|(v, w)| (v, w / total)).collect()
            })
            .collect();
        c.belief.mean = Some(
            sites
                .iter()
                .map(|s| s.iter().map(|(v, p)| v * p).sum())
                .collect(),
        );
        TinyInstance::new(c, DiscretePrior::new(sites)).expect("generated within limits")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    /// Optimal value of the root belief.
    pub value: f64,
    /// Value of each admissible root action.
    pub q: Vec<(Action, f64)>,
    /// Root actions attaining the optimum (to 1e-9 relative).
    pub optimal: Vec<Action>,
    /// Number of distinct beliefs evaluated.
    pub beliefs: usize,
}

impl ExactSolution {
    pub fn q_of(&self, action: Action) -> Option<f64> {
        self.q.iter().find(|(a, _)| *a == action).map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug)]
struct DiscreteBelief {
    operating: Vec<bool>,
    built: Vec<bool>,
    t: u32,
    particles: Vec<(Vec<f64>, f64)>,
}

impl DiscreteBelief {
    fn key(&self) -> Vec<u64> {
        let mut k = vec![self.t as u64];
        k.extend(self.operating.iter().map(|&b| b as u64));
        k.extend(self.built.iter().map(|&b| b as u64));
        for (v, p) in &self.particles {
            k.extend(v.iter().map(|x| x.to_bits()));
            // probabilities reached along different paths differ in the last bits
            k.push((p * 1e12).round() as u64);
        }
        k
    }

    /// Normalize, merge equal reserve vectors, sort.
    fn canonical(mut self) -> Self {
        self.particles.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(self.particles.len());
        for (v, p) in self.particles {
            match merged.last_mut() {
                Some((w, q)) if *w == v => *q += p,
                _ => merged.push((v, p)),
            }
        }
        let total: f64 = merged.iter().map(|x| x.1).sum();
        for x in &mut merged {
            x.1 /= total;
        }
        self.particles = merged;
        self
    }
}

struct Solver<'a> {
    config: &'a ProblemConfig,
    allow_explore: bool,
    memo: HashMap<Vec<u64>, f64>,
    obs_bins: Vec<f64>,
}

impl Solver<'_> {
    fn actions(&self, b: &DiscreteBelief) -> Vec<Action> {
        valid_actions_for(&b.operating, &b.built)
            .into_iter()
            .filter(|a| self.allow_explore || !a.is_explore())
            .collect()
    }

    fn value(&mut self, b: &DiscreteBelief) -> f64 {
        if b.t >= self.config.horizon {
            return 0.0;
        }
        let key = b.key();
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let v = self
            .actions(b)
            .into_iter()
            .map(|a| self.q(b, a))
            .fold(f64::NEG_INFINITY, f64::max);
        self.memo.insert(key, v);
        v
    }

    /// Joint `(E, L, probability)` outcomes for the operating sites.
    fn extraction_outcomes(&self, state: &State) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
        let n = state.n_sites();
        let mut out = vec![(vec![0.0; n], vec![0.0; n], 1.0)];
        for j in 0..n {
            if !state.operating[j] {
                continue;
            }
            let site = &self.config.sites[j];
            let yields = site.yield_dist.support().expect("checked finite");
            let losses = if self.config.has_loss(j) {
                site.loss.support().expect("checked finite")
            } else {
                vec![(0.0, 1.0)]
            };
            let mut next = Vec::new();
            for (e, l, p) in &out {
                for &(y, py) in &yields {
                    let ej = y.round().clamp(0.0, state.reserves[j].max(0.0));
                    for &(x, px) in &losses {
                        let lj = x.round().clamp(0.0, ej);
                        let (mut e2, mut l2) = (e.clone(), l.clone());
                        e2[j] = ej;
                        l2[j] = lj;
                        next.push((e2, l2, p * py * px));
                    }
                }
            }
            out = next;
        }
        out
    }

    fn q(&mut self, b: &DiscreteBelief, action: Action) -> f64 {
        let config = self.config;
        let year = b.t + 1;
        let demand: Vec<(f64, f64)> = config
            .demand_band(year)
            .and_then(|band| band.dist.support())
            .expect("checked finite")
            .into_iter()
            .map(|(d, p)| (d.round().max(0.0), p))
            .collect();

        let mut expected = 0.0;
        // observation -> successor particles
        let mut branches: Vec<(Option<f64>, Vec<(Vec<f64>, f64)>)> = Vec::new();
        let mut next_flags: Option<(Vec<bool>, Vec<bool>)> = None;
        for (v, p) in &b.particles {
            let state = State {
                reserves: v.clone(),
                operating: b.operating.clone(),
                built: b.built.clone(),
                imported: 0.0,
                domestic: 0.0,
                t: b.t,
            };
            let readings: Vec<(Option<f64>, f64)> = match action {
                Action::Explore(j) => self
                    .obs_bins
                    .iter()
                    .map(|&o| (Some(o), observation_probability(o, v[j], config)))
                    .filter(|(_, p)| *p > 0.0)
                    .collect(),
                _ => vec![(None, 1.0)],
            };
            for (e, l, pe) in self.extraction_outcomes(&state) {
                let next = transition(&state, action, &e, &l, config).expect("valid action");
                if next_flags.is_none() {
                    next_flags = Some((next.operating.clone(), next.built.clone()));
                }
                for &(d, pd) in &demand {
                    let w = p * pe * pd;
                    expected += w * reward(&state, action, &e, &l, d, config).total;
                }
                for &(o, po) in &readings {
                    let w = p * pe * po;
                    match branches.iter_mut().find(|(x, _)| *x == o) {
                        Some((_, parts)) => parts.push((next.reserves.clone(), w)),
                        None => branches.push((o, vec![(next.reserves.clone(), w)])),
                    }
                }
            }
        }
        let (operating, built) = next_flags.expect("belief has particles");
        let mut future = 0.0;
        for (_, particles) in branches {
            let mass: f64 = particles.iter().map(|x| x.1).sum();
            if mass <= 0.0 {
                continue;
            }
            let child = DiscreteBelief {
                operating: operating.clone(),
                built: built.clone(),
                t: b.t + 1,
                particles,
            }
            .canonical();
            future += mass * self.value(&child);
        }
        expected + config.discount * future
    }
}

fn solve(inst: &TinyInstance, allow_explore: bool) -> ExactSolution {
    let config = &inst.config;
    let cap = round_to_bin(config.obs_cap.unwrap_or(0.0), config.obs_bin);
    let n_bins = (cap / config.obs_bin).round() as usize + 1;
    let mut solver = Solver {
        config,
        allow_explore,
        memo: HashMap::new(),
        obs_bins: (0..n_bins).map(|k| k as f64 * config.obs_bin).collect(),
    };
    let root = DiscreteBelief {
        operating: inst.prior.observables.operating.clone(),
        built: inst.prior.observables.built.clone(),
        t: inst.prior.observables.t,
        particles: inst.prior.joint(),
    }
    .canonical();
    if root.t >= config.horizon {
        return ExactSolution {
            value: 0.0,
            q: Vec::new(),
            optimal: Vec::new(),
            beliefs: 0,
        };
    }
    let q: Vec<(Action, f64)> = solver
        .actions(&root)
        .into_iter()
        .map(|a| (a, solver.q(&root, a)))
        .collect();
    let value = q.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * value.abs().max(1.0);
    let optimal = q.iter().filter(|x| x.1 >= value - tol).map(|x| x.0).collect();
    ExactSolution {
        value,
        q,
        optimal,
        beliefs: solver.memo.len() + 1,
    }
}

/// Exact optimal values at the root of a tiny instance.
pub fn solve_exact_small(inst: &TinyInstance) -> ExactSolution {
    solve(inst, true)
}

/// As [`solve_exact_small`] with EXPLORE removed from the action set.
pub fn solve_exact_without_explore(inst: &TinyInstance) -> ExactSolution {
    solve(inst, false)
}
