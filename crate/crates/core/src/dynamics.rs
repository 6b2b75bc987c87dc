//! Generative model: extraction and loss sampling, state transition, demand,
//! observation emission and the four-part reward.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::ProblemConfig;
use crate::dist::{Dist, Noise, Stream};
use crate::domain::{bin_reading, is_valid, round_to_bin, Action, Observation, State};
use crate::error::{Error, Result};

/// Reward components as non-negative magnitudes (R2 may dip below zero
/// through restoration absorption) plus their weighted total.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r1_domestic_penalty: f64,
    pub r2_emissions: f64,
    pub r3_unfulfilled: f64,
    pub r4_profit: f64,
    pub revenue: f64,
    pub cost: f64,
    pub total: f64,
}

impl RewardBreakdown {
    /// `-w1 R1 - w2 R2 - w3 R3 + w4 R4`.
    pub fn weighted(weights: &[f64; 4], r1: f64, r2: f64, r3: f64, r4: f64) -> f64 {
        -weights[0] * r1 - weights[1] * r2 - weights[2] * r3 + weights[3] * r4
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub state: State,
    pub action: Action,
    pub next_state: State,
    pub observation: Observation,
    pub reward_total: f64,
    pub reward_parts: RewardBreakdown,
    pub extracted: Vec<f64>,
    pub losses: Vec<f64>,
    pub delivered: Vec<f64>,
    pub demand: f64,
    pub feed: f64,
}

impl StepOutcome {
    /// Mass of refined product sold this step, `min(d, rho * l)`.
    pub fn sold(&self, config: &ProblemConfig) -> f64 {
        self.demand.min(config.extraction_factor * self.feed)
    }
}

fn round_mass(x: f64) -> f64 {
    x.round()
}

/// Extraction `E` and loss `L` for the sites operating in `state`.
pub fn sample_extraction(
    state: &State,
    config: &ProblemConfig,
    noise: &mut impl Noise,
) -> (Vec<f64>, Vec<f64>) {
    let n = state.n_sites();
    let mut e = vec![0.0; n];
    let mut l = vec![0.0; n];
    for j in 0..n {
        if !state.operating[j] {
            continue;
        }
        let site = &config.sites[j];
        let draw = noise.draw(&site.yield_dist, Stream::Yield, j, state.t);
        e[j] = round_mass(draw).clamp(0.0, state.reserves[j].max(0.0));
        if config.has_loss(j) {
            let loss = noise.draw(&site.loss, Stream::Loss, j, state.t);
            l[j] = round_mass(loss).clamp(0.0, e[j]);
        }
    }
    (e, l)
}

/// Mass reaching the plant from each site.
pub fn contributions(e: &[f64], l: &[f64], config: &ProblemConfig) -> Vec<f64> {
    e.iter()
        .zip(l)
        .enumerate()
        .map(|(j, (&e, &l))| if config.has_loss(j) { (e - l).max(0.0) } else { e })
        .collect()
}

/// Next state after `action` with extraction `e` and losses `l`.
pub fn transition(
    state: &State,
    action: Action,
    e: &[f64],
    l: &[f64],
    config: &ProblemConfig,
) -> Result<State> {
    if !is_valid(action, &state.operating, &state.built) {
        return Err(Error::InvalidAction { action, t: state.t });
    }
    let mut next = state.clone();
    let delivered = contributions(e, l, config);
    for j in 0..state.n_sites() {
        next.reserves[j] = (state.reserves[j] - e[j]).max(0.0);
        if config.is_domestic(j) {
            next.domestic += delivered[j];
        } else {
            next.imported += delivered[j];
        }
    }
    match action {
        Action::Build(j) => {
            next.operating[j] = true;
            next.built[j] = true;
        }
        Action::Restore(j) => next.operating[j] = false,
        Action::DoNothing | Action::Explore(_) => {}
    }
    next.t = state.t + 1;
    Ok(next)
}

/// Demand for `year` (1-based), rounded to whole mass units.
pub fn demand_at(year: u32, config: &ProblemConfig, noise: &mut impl Noise) -> Result<f64> {
    if year == 0 || year > config.horizon {
        return Err(Error::DemandOutOfRange(year));
    }
    let band = config
        .demand_band(year)
        .ok_or(Error::DemandOutOfRange(year))?;
    Ok(round_mass(noise.draw(&band.dist, Stream::Demand, 0, year)).max(0.0))
}

/// Reward of taking `action` in `state` given the step's extraction,
/// losses and demand.
pub fn reward(
    state: &State,
    action: Action,
    e: &[f64],
    l: &[f64],
    demand: f64,
    config: &ProblemConfig,
) -> RewardBreakdown {
    let c = &config.costs;
    let r1 = match action {
        Action::Build(j) if config.is_domestic(j) && state.t < config.delay_goal => {
            c.domestic_penalty
        }
        _ => 0.0,
    };

    let emitted: f64 = e
        .iter()
        .zip(&config.sites)
        .map(|(e, s)| e * s.emission_factor)
        .sum();
    let absorbed = match action {
        Action::Restore(j) => config.sites[j].restore_absorption,
        _ => 0.0,
    };
    let r2 = emitted * config.emission_scale - absorbed;

    let contrib = contributions(e, l, config);
    let feed: f64 = contrib.iter().sum();
    let refined = config.extraction_factor * feed;
    let r3 = (demand - refined).max(0.0);

    let revenue = demand.min(refined) * c.lithium_price;
    let action_cost = match action {
        Action::DoNothing => 0.0,
        Action::Explore(_) => c.explore,
        Action::Build(_) => c.build,
        Action::Restore(_) => c.restore,
    };
    let operating = state.operating.iter().filter(|&&m| m).count() as f64 * c.operating;
    let haul: f64 = contrib
        .iter()
        .zip(&config.sites)
        .map(|(z, s)| (s.transport_cost + c.processing) * z)
        .sum();
    let cost = action_cost + operating + haul;
    let r4 = revenue - cost;

    RewardBreakdown {
        r1_domestic_penalty: r1,
        r2_emissions: r2,
        r3_unfulfilled: r3,
        r4_profit: r4,
        revenue,
        cost,
        total: RewardBreakdown::weighted(&config.weights, r1, r2, r3, r4),
    }
}

/// Observation emitted after `action` in `state` (reserves before the
/// transition).
pub fn emit_observation(
    state: &State,
    action: Action,
    config: &ProblemConfig,
    noise: &mut impl Noise,
) -> Observation {
    match action {
        Action::Explore(j) => {
            let dist = Dist::normal(state.reserves[j], config.obs_noise);
            let raw = noise.draw(&dist, Stream::Observation, j, state.t);
            Observation::single(state.n_sites(), j, bin_reading(raw, config))
        }
        _ => Observation::none(state.n_sites()),
    }
}

/// One full step of the generative model.
pub fn step(
    state: &State,
    action: Action,
    config: &ProblemConfig,
    noise: &mut impl Noise,
) -> Result<StepOutcome> {
    if state.is_terminal(config) {
        return Err(Error::EpisodeOver { t: state.t });
    }
    if !is_valid(action, &state.operating, &state.built) {
        return Err(Error::InvalidAction { action, t: state.t });
    }
    let demand = demand_at(state.t + 1, config, noise)?;
    let (e, l) = sample_extraction(state, config, noise);
    let observation = emit_observation(state, action, config, noise);
    let parts = reward(state, action, &e, &l, demand, config);
    let next_state = transition(state, action, &e, &l, config)?;
    let delivered = contributions(&e, &l, config);
    let feed = delivered.iter().sum();
    Ok(StepOutcome {
        state: state.clone(),
        action,
        next_state,
        observation,
        reward_total: parts.total,
        reward_parts: parts,
        extracted: e,
        losses: l,
        delivered,
        demand,
        feed,
    })
}

/// Allocation-free [`step`] for search: advances `state` in place and
/// returns the weighted reward and the binned reading of an EXPLORE.
pub fn step_in_place(
    state: &mut State,
    action: Action,
    config: &ProblemConfig,
    noise: &mut impl Noise,
) -> Result<(f64, Option<f64>)> {
    if state.is_terminal(config) {
        return Err(Error::EpisodeOver { t: state.t });
    }
    if !is_valid(action, &state.operating, &state.built) {
        return Err(Error::InvalidAction { action, t: state.t });
    }
    let c = &config.costs;
    let t = state.t;
    let demand = demand_at(t + 1, config, noise)?;
    let reading = match action {
        Action::Explore(j) => {
            let dist = Dist::normal(state.reserves[j], config.obs_noise);
            Some(bin_reading(noise.draw(&dist, Stream::Observation, j, t), config))
        }
        _ => None,
    };

    let mut emitted = 0.0;
    let mut feed = 0.0;
    let mut haul = 0.0;
    let mut n_operating = 0usize;
    for j in 0..state.n_sites() {
        if !state.operating[j] {
            continue;
        }
        n_operating += 1;
        let site = &config.sites[j];
        let e = round_mass(noise.draw(&site.yield_dist, Stream::Yield, j, t))
            .clamp(0.0, state.reserves[j].max(0.0));
        let z = if config.has_loss(j) {
            let l = round_mass(noise.draw(&site.loss, Stream::Loss, j, t)).clamp(0.0, e);
            (e - l).max(0.0)
        } else {
            e
        };
        if config.is_domestic(j) {
            state.domestic += z;
        } else {
            state.imported += z;
        }
        state.reserves[j] = (state.reserves[j] - e).max(0.0);
        emitted += e * site.emission_factor;
        feed += z;
        haul += (site.transport_cost + c.processing) * z;
    }

    let r1 = match action {
        Action::Build(j) if config.is_domestic(j) && t < config.delay_goal => c.domestic_penalty,
        _ => 0.0,
    };
    let absorbed = match action {
        Action::Restore(j) => config.sites[j].restore_absorption,
        _ => 0.0,
    };
    let r2 = emitted * config.emission_scale - absorbed;
    let refined = config.extraction_factor * feed;
    let r3 = (demand - refined).max(0.0);
    let action_cost = match action {
        Action::DoNothing => 0.0,
        Action::Explore(_) => c.explore,
        Action::Build(_) => c.build,
        Action::Restore(_) => c.restore,
    };
    let cost = action_cost + n_operating as f64 * c.operating + haul;
    let r4 = demand.min(refined) * c.lithium_price - cost;

    match action {
        Action::Build(j) => {
            state.operating[j] = true;
            state.built[j] = true;
        }
        Action::Restore(j) => state.operating[j] = false,
        Action::DoNothing | Action::Explore(_) => {}
    }
    state.t = t + 1;
    Ok((RewardBreakdown::weighted(&config.weights, r1, r2, r3, r4), reading))
}

/// Probability that exploring a site with true reserve `truth` yields the
/// binned reading `reading`, exactly as [`emit_observation`] produces it.
pub fn observation_probability(reading: f64, truth: f64, config: &ProblemConfig) -> f64 {
    let bin = config.obs_bin;
    let cap = config.obs_cap.map(|c| round_to_bin(c, bin));
    if reading < 0.0 || cap.is_some_and(|c| reading > c) {
        return 0.0;
    }
    let lo = if reading <= 0.0 { f64::NEG_INFINITY } else { reading - 0.5 * bin };
    let hi = if cap == Some(reading) { f64::INFINITY } else { reading + 0.5 * bin };
    let sigma = config.obs_noise;
    if sigma <= 0.0 {
        return if truth >= lo && truth < hi { 1.0 } else { 0.0 };
    }
    let n = Normal::new(truth, sigma).expect("sigma > 0");
    let p_hi = if hi.is_infinite() { 1.0 } else { n.cdf(hi) };
    let p_lo = if lo.is_infinite() { 0.0 } else { n.cdf(lo) };
    (p_hi - p_lo).max(0.0)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::dist::CrnNoise;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn in_place_step_matches_full_step(
            seed in any::<u64>(),
            reserves in proptest::collection::vec(0u32..120, 4),
            picks in proptest::collection::vec(any::<prop::sample::Index>(), 30),
        ) {
            let config = ProblemConfig::table1();
            let mut full = State::initial(reserves.iter().map(|r| *r as f64 * 1000.0).collect());
            let mut fast = full.clone();
            for pick in picks {
                let acts = full.valid_actions();
                let a = acts[pick.index(acts.len())];
                let out = step(&full, a, &config, &mut CrnNoise::new(seed)).unwrap();
                let (r, reading) = step_in_place(&mut fast, a, &config, &mut CrnNoise::new(seed)).unwrap();
                prop_assert_eq!(r.to_bits(), out.reward_total.to_bits());
                prop_assert_eq!(reading, out.observation.measured_site().map(|x| x.1));
                prop_assert_eq!(&fast, &out.next_state);
                full = out.next_state;
            }
        }
    }
}
