//! Problem data model: actions, states, observations and the validity rules
//! every other module relies on.
//!
//! Sites are indexed from 0 internally and displayed 1-based (`BUILD(1)` is
//! the first site in the config).

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::ProblemConfig;
use crate::error::{Error, Result};

/// Sentinel used for "no measurement" in external formats.
pub const NO_MEASUREMENT: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    DoNothing,
    Explore(usize),
    Build(usize),
    Restore(usize),
}

impl Action {
    pub fn site(self) -> Option<usize> {
        match self {
            Action::DoNothing => None,
            Action::Explore(j) | Action::Build(j) | Action::Restore(j) => Some(j),
        }
    }

    /// Position in the fixed kind order DO_NOTHING < EXPLORE < BUILD < RESTORE.
    pub fn kind_rank(self) -> u8 {
        match self {
            Action::DoNothing => 0,
            Action::Explore(_) => 1,
            Action::Build(_) => 2,
            Action::Restore(_) => 3,
        }
    }

    /// Tie-breaking key: lowest site index first, then kind order.
    /// `DoNothing` sorts before every site action.
    pub fn tie_key(self) -> (usize, u8) {
        match self.site() {
            None => (0, 0),
            Some(j) => (j + 1, self.kind_rank()),
        }
    }

    pub fn is_explore(self) -> bool {
        matches!(self, Action::Explore(_))
    }

    /// Every action for `n` sites in canonical order.
    pub fn all(n: usize) -> Vec<Action> {
        let mut out = Vec::with_capacity(3 * n + 1);
        out.push(Action::DoNothing);
        for j in 0..n {
            out.push(Action::Explore(j));
            out.push(Action::Build(j));
            out.push(Action::Restore(j));
        }
        out
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::DoNothing => write!(f, "DO_NOTHING"),
            Action::Explore(j) => write!(f, "EXPLORE({})", j + 1),
            Action::Build(j) => write!(f, "BUILD({})", j + 1),
            Action::Restore(j) => write!(f, "RESTORE({})", j + 1),
        }
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let upper = s.to_ascii_uppercase();
        if upper == "DO_NOTHING" || upper == "DONOTHING" || upper == "NOTHING" {
            return Ok(Action::DoNothing);
        }
        let bad = || Error::Domain(format!("cannot parse action `{s}`"));
        let open = upper.find('(').ok_or_else(bad)?;
        if !upper.ends_with(')') {
            return Err(bad());
        }
        let site: usize = upper[open + 1..upper.len() - 1]
            .trim()
            .parse()
            .map_err(|_| bad())?;
        if site == 0 {
            return Err(Error::Domain(format!("site indices are 1-based: `{s}`")));
        }
        match &upper[..open] {
            "EXPLORE" => Ok(Action::Explore(site - 1)),
            "BUILD" => Ok(Action::Build(site - 1)),
            "RESTORE" => Ok(Action::Restore(site - 1)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The fully observed part of a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub operating: Vec<bool>,
    /// Whether each site has ever been built this episode (builds are one-shot).
    pub built: Vec<bool>,
    pub imported: f64,
    pub domestic: f64,
    pub t: u32,
}

impl Observables {
    pub fn initial(n: usize) -> Self {
        Observables {
            operating: vec![false; n],
            built: vec![false; n],
            imported: 0.0,
            domestic: 0.0,
            t: 0,
        }
    }

    pub fn valid_actions(&self) -> Vec<Action> {
        valid_actions_for(&self.operating, &self.built)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// Remaining reserves per site (mass units).
    pub reserves: Vec<f64>,
    pub operating: Vec<bool>,
    pub built: Vec<bool>,
    pub imported: f64,
    pub domestic: f64,
    pub t: u32,
}

impl State {
    /// Episode start: nothing built, clock at zero.
    pub fn initial(reserves: Vec<f64>) -> Self {
        let n = reserves.len();
        State {
            reserves,
            operating: vec![false; n],
            built: vec![false; n],
            imported: 0.0,
            domestic: 0.0,
            t: 0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.reserves.len()
    }

    pub fn observables(&self) -> Observables {
        Observables {
            operating: self.operating.clone(),
            built: self.built.clone(),
            imported: self.imported,
            domestic: self.domestic,
            t: self.t,
        }
    }

    pub fn with_observables(reserves: Vec<f64>, obs: &Observables) -> Self {
        State {
            reserves,
            operating: obs.operating.clone(),
            built: obs.built.clone(),
            imported: obs.imported,
            domestic: obs.domestic,
            t: obs.t,
        }
    }

    pub fn is_terminal(&self, config: &ProblemConfig) -> bool {
        self.t >= config.horizon
    }

    pub fn valid_actions(&self) -> Vec<Action> {
        valid_actions_for(&self.operating, &self.built)
    }
}

/// Actions permitted by the operating/built flags, in canonical order.
///
/// EXPLORE and BUILD need a site that was never built; RESTORE needs an
/// operating site. DO_NOTHING is always available.
pub fn valid_actions_for(operating: &[bool], built: &[bool]) -> Vec<Action> {
    let mut out = Vec::with_capacity(1 + 2 * operating.len());
    out.push(Action::DoNothing);
    for (j, (&m, &b)) in operating.iter().zip(built).enumerate() {
        if m {
            out.push(Action::Restore(j));
        } else if !b {
            out.push(Action::Explore(j));
            out.push(Action::Build(j));
        }
    }
    out
}

pub fn valid_actions(state: &State, _config: &ProblemConfig) -> Vec<Action> {
    state.valid_actions()
}

pub fn is_valid(action: Action, operating: &[bool], built: &[bool]) -> bool {
    match action {
        Action::DoNothing => true,
        Action::Explore(j) | Action::Build(j) => {
            j < operating.len() && !operating[j] && !built[j]
        }
        Action::Restore(j) => j < operating.len() && operating[j],
    }
}

/// Round to the nearest multiple of `bin`, ties away from zero.
pub fn round_to_bin(x: f64, bin: f64) -> f64 {
    if bin <= 0.0 {
        return x.round();
    }
    (x / bin).round() * bin
}

/// Per-site measurement vector. `None` is the absent measurement
/// (`-1` in external formats).
#[derive(Clone, Debug, Default)]
pub struct Observation {
    readings: Vec<Option<f64>>,
}

impl Observation {
    pub fn none(n: usize) -> Self {
        Observation {
            readings: vec![None; n],
        }
    }

    pub fn readings(&self) -> &[Option<f64>] {
        &self.readings
    }

    pub fn reading(&self, site: usize) -> Option<f64> {
        self.readings.get(site).copied().flatten()
    }

    /// The single measured site, if any.
    pub fn measured_site(&self) -> Option<(usize, f64)> {
        self.readings
            .iter()
            .enumerate()
            .find_map(|(j, r)| r.map(|v| (j, v)))
    }

    pub fn is_empty(&self) -> bool {
        self.readings.iter().all(Option::is_none)
    }

    pub fn to_sentinel(&self) -> Vec<f64> {
        self.readings
            .iter()
            .map(|r| r.unwrap_or(NO_MEASUREMENT))
            .collect()
    }

    pub fn from_sentinel(values: &[f64]) -> Self {
        Observation {
            readings: values
                .iter()
                .map(|&v| if v < 0.0 { None } else { Some(v) })
                .collect(),
        }
    }

    pub(crate) fn single(n: usize, site: usize, value: f64) -> Self {
        let mut obs = Observation::none(n);
        obs.readings[site] = Some(value);
        obs
    }
}

impl PartialEq for Observation {
    fn eq(&self, other: &Self) -> bool {
        self.readings.len() == other.readings.len()
            && self
                .readings
                .iter()
                .zip(&other.readings)
                .all(|(a, b)| a.map(f64::to_bits) == b.map(f64::to_bits))
    }
}

impl Eq for Observation {}

impl Hash for Observation {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for r in &self.readings {
            r.map(f64::to_bits).hash(state);
        }
    }
}

impl Serialize for Observation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_sentinel().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Observation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(deserializer)?;
        Ok(Observation::from_sentinel(&v))
    }
}

/// Discretize a raw reading for `site` into an observation vector.
pub fn encode_observation(site: usize, reading: f64, config: &ProblemConfig) -> Result<Observation> {
    let n = config.n_sites();
    if site >= n {
        return Err(Error::Domain(format!("site {} out of range (n={n})", site + 1)));
    }
    if !(reading >= 0.0) {
        return Err(Error::Domain(format!(
            "observation reading must be non-negative, got {reading}"
        )));
    }
    Ok(Observation::single(n, site, bin_reading(reading, config)))
}

/// Binning applied to a non-negative reading: nearest multiple of
/// `obs_bin`, then capped at `obs_cap` when one is configured.
pub(crate) fn bin_reading(reading: f64, config: &ProblemConfig) -> f64 {
    let v = round_to_bin(reading.max(0.0), config.obs_bin);
    match config.obs_cap {
        Some(cap) => v.min(round_to_bin(cap, config.obs_bin)),
        None => v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemConfig;

    fn cfg() -> ProblemConfig {
        ProblemConfig::table1()
    }

    #[test]
    fn fresh_state_has_nine_actions() {
        let s = State::initial(vec![1.0; 4]);
        let acts = valid_actions(&s, &cfg());
        assert_eq!(acts.len(), 9);
        assert_eq!(acts[0], Action::DoNothing);
        for j in 0..4 {
            assert!(acts.contains(&Action::Explore(j)));
            assert!(acts.contains(&Action::Build(j)));
            assert!(!acts.contains(&Action::Restore(j)));
        }
    }

    #[test]
    fn operating_site_can_only_be_restored() {
        let mut s = State::initial(vec![1.0; 4]);
        s.operating[0] = true;
        s.built[0] = true;
        let acts = s.valid_actions();
        assert!(acts.contains(&Action::Restore(0)));
        assert!(!acts.contains(&Action::Explore(0)));
        assert!(!acts.contains(&Action::Build(0)));
    }

    #[test]
    fn restored_sites_leave_only_do_nothing() {
        let mut s = State::initial(vec![1.0; 4]);
        s.built = vec![true; 4];
        assert_eq!(s.valid_actions(), vec![Action::DoNothing]);
    }

    #[test]
    fn exhaustive_flag_patterns() {
        // every operating/built pattern for n <= 4, with operating => built
        for n in 1..=4usize {
            for mask in 0..(1u32 << n) {
                for bmask in 0..(1u32 << n) {
                    let operating: Vec<bool> = (0..n).map(|j| mask >> j & 1 == 1).collect();
                    let built: Vec<bool> =
                        (0..n).map(|j| operating[j] || bmask >> j & 1 == 1).collect();
                    let acts = valid_actions_for(&operating, &built);
                    assert_eq!(acts[0], Action::DoNothing);
                    for j in 0..n {
                        let restore = acts.contains(&Action::Restore(j));
                        let explore = acts.contains(&Action::Explore(j));
                        let build = acts.contains(&Action::Build(j));
                        assert_eq!(restore, operating[j]);
                        assert_eq!(explore, !built[j]);
                        assert_eq!(build, !built[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn action_display_round_trips() {
        for a in Action::all(4) {
            let parsed: Action = a.to_string().parse().unwrap();
            assert_eq!(parsed, a);
        }
        assert!("BUILD(0)".parse::<Action>().is_err());
        assert!("DIG(1)".parse::<Action>().is_err());
    }

    #[test]
    fn tie_key_orders_site_then_kind() {
        let mut acts = Action::all(2);
        acts.reverse();
        acts.sort_by_key(|a| a.tie_key());
        assert_eq!(acts, Action::all(2));
    }

    #[test]
    fn encode_rounds_to_nearest_bin() {
        let c = cfg();
        let o = encode_observation(1, 90400.0, &c).unwrap();
        assert_eq!(o.to_sentinel(), vec![-1.0, 90000.0, -1.0, -1.0]);
        let o = encode_observation(0, 0.0, &c).unwrap();
        assert_eq!(o.reading(0), Some(0.0));
        // ties resolve half-up
        let o = encode_observation(2, 500.0, &c).unwrap();
        assert_eq!(o.reading(2), Some(1000.0));
        assert!(encode_observation(0, -1.0, &c).is_err());
        assert!(encode_observation(9, 1.0, &c).is_err());
    }

    #[test]
    fn encode_is_idempotent_on_binned_values() {
        let c = cfg();
        for k in 0..50 {
            let v = k as f64 * c.obs_bin;
            let o = encode_observation(3, v, &c).unwrap();
            assert_eq!(o.reading(3), Some(v));
        }
    }

    #[test]
    fn sentinel_round_trip() {
        let o = Observation::single(4, 2, 7000.0);
        assert_eq!(Observation::from_sentinel(&o.to_sentinel()), o);
        let json = serde_json::to_string(&o).unwrap();
        assert_eq!(json, "[-1.0,-1.0,7000.0,-1.0]");
    }
}
