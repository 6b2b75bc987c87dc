use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::domain::round_to_bin;
use crate::error::{Error, Result};
use crate::Belief;

/// Largest offset (in prior std) an accurate scenario may place the truth at.
pub const ACCURATE_BOUND: f64 = 1.96;
/// Smallest offset at least one site of an inaccurate scenario must reach.
pub const INACCURATE_BOUND: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioLabel {
    Accurate,
    Inaccurate,
    Custom,
}

impl ScenarioLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioLabel::Accurate => "accurate",
            ScenarioLabel::Inaccurate => "inaccurate",
            ScenarioLabel::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accurate" => Ok(ScenarioLabel::Accurate),
            "inaccurate" => Ok(ScenarioLabel::Inaccurate),
            "custom" => Ok(ScenarioLabel::Custom),
            other => Err(Error::Domain(format!(
                "unknown scenario `{other}` (expected accurate, inaccurate or custom)"
            ))),
        }
    }
}

/// Ground truth plus the prior the policies start from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: ScenarioLabel,
    pub config: ProblemConfig,
    pub true_reserves: Vec<f64>,
    pub prior_mean: Vec<f64>,
    pub prior_std: Vec<f64>,
}

impl Scenario {
    /// Truth at `offset` prior standard deviations from the prior mean, in the
    /// direction of the configured signs (domestic up, foreign down when the
    /// config has no `[scenarios]` table).
    fn offset(label: ScenarioLabel, config: ProblemConfig, offset: f64) -> Result<Self> {
        let mean = config.prior_mean();
        let std = config.prior_std();
        let signs = match &config.scenarios {
            Some(s) => s.signs.clone(),
            None => (0..config.n_sites())
                .map(|j| if config.is_domestic(j) { 1.0 } else { -1.0 })
                .collect(),
        };
        let truth = mean
            .iter()
            .zip(&std)
            .zip(&signs)
            .map(|((m, s), sign)| round_to_bin(m + sign * offset * s, config.reserve_bin).max(0.0))
            .collect();
        let scenario = Scenario {
            label,
            true_reserves: truth,
            prior_mean: mean,
            prior_std: std,
            config,
        };
        scenario.check()?;
        Ok(scenario)
    }

    pub fn accurate(config: ProblemConfig) -> Result<Self> {
        let k = config.scenarios.as_ref().map_or(1.0, |s| s.accurate_offset);
        Self::offset(ScenarioLabel::Accurate, config, k)
    }

    pub fn inaccurate(config: ProblemConfig) -> Result<Self> {
        let k = config.scenarios.as_ref().map_or(4.0, |s| s.inaccurate_offset);
        Self::offset(ScenarioLabel::Inaccurate, config, k)
    }

    pub fn custom(
        config: ProblemConfig,
        true_reserves: Vec<f64>,
        prior_mean: Vec<f64>,
        prior_std: Vec<f64>,
    ) -> Result<Self> {
        let scenario = Scenario {
            label: ScenarioLabel::Custom,
            config,
            true_reserves,
            prior_mean,
            prior_std,
        };
        scenario.check()?;
        Ok(scenario)
    }

    /// Accurate or inaccurate scenario; custom ones need explicit reserves.
    pub fn from_label(label: ScenarioLabel, config: ProblemConfig) -> Result<Self> {
        match label {
            ScenarioLabel::Accurate => Self::accurate(config),
            ScenarioLabel::Inaccurate => Self::inaccurate(config),
            ScenarioLabel::Custom => Err(Error::Domain(
                "a custom scenario needs explicit true reserves".into(),
            )),
        }
    }

    /// `|v*_j - mu_j| / sigma_j` per site.
    pub fn z_scores(&self) -> Vec<f64> {
        self.true_reserves
            .iter()
            .zip(&self.prior_mean)
            .zip(&self.prior_std)
            .map(|((v, m), s)| if *s > 0.0 { (v - m).abs() / s } else if v == m { 0.0 } else { f64::INFINITY })
            .collect()
    }

    pub fn initial_error(&self, site: usize) -> f64 {
        (self.true_reserves[site] - self.prior_mean[site]).abs()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.config.n_sites();
        if [self.true_reserves.len(), self.prior_mean.len(), self.prior_std.len()] != [n; 3] {
            return Err(Error::Domain(format!("scenario vectors must have {n} entries")));
        }
        if self.true_reserves.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("true reserves must be finite and >= 0".into()));
        }
        let z = self.z_scores();
        match self.label {
            ScenarioLabel::Accurate if z.iter().any(|&z| z > ACCURATE_BOUND) => Err(Error::Domain(
                format!("accurate scenario has a site beyond {ACCURATE_BOUND} prior std"),
            )),
            ScenarioLabel::Inaccurate if !z.iter().any(|&z| z >= INACCURATE_BOUND) => {
                Err(Error::Domain(format!(
                    "inaccurate scenario needs a site at least {INACCURATE_BOUND} prior std off"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn initial_belief(&self) -> Result<Belief> {
        Belief::new(
            self.prior_mean.clone(),
            self.prior_std.clone(),
            crate::domain::Observables::initial(self.config.n_sites()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_inaccurate_truth() {
        let s = Scenario::inaccurate(ProblemConfig::table1()).unwrap();
        assert_eq!(s.true_reserves, vec![140_000.0, 90_000.0, 60_000.0, 10_000.0]);
        assert!(s.z_scores().iter().all(|&z| z == 4.0));
    }

    #[test]
    fn default_accurate_truth_is_inside_the_interval() {
        let s = Scenario::accurate(ProblemConfig::table1()).unwrap();
        assert!(s.z_scores().iter().all(|&z| z <= ACCURATE_BOUND));
    }

    #[test]
    fn custom_scenarios_are_checked() {
        let c = ProblemConfig::table1();
        let m = c.prior_mean();
        let s = c.prior_std();
        assert!(Scenario::custom(c.clone(), vec![-1.0; 4], m.clone(), s.clone()).is_err());
        assert!(Scenario::custom(c.clone(), vec![1.0; 3], m.clone(), s.clone()).is_err());
        assert!(Scenario::custom(c, m.clone(), m, s).is_ok());
    }

    #[test]
    fn labels_parse() {
        for l in [ScenarioLabel::Accurate, ScenarioLabel::Inaccurate, ScenarioLabel::Custom] {
            assert_eq!(l.as_str().parse::<ScenarioLabel>().unwrap(), l);
        }
        assert!("typical".parse::<ScenarioLabel>().is_err());
    }
}
