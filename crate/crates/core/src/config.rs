//! Problem configuration: file format, unit handling and invariant checks.
//!
//! Money is held in millions of dollars. In the file every monetary field
//! accepts either a bare number (already in $M) or `{ value, unit }` with
//! `unit` one of `usd`, `kusd`, `musd`, `busd`; per-mass prices and costs are
//! per mass unit of the config.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::dist::Dist;
use crate::error::{ConfigIssue, Error, Result};

/// Name under which the bundled default config can be referenced.
pub const TABLE1_NAME: &str = "table1.default";

/// The bundled default configuration file.
pub const TABLE1_SOURCE: &str = include_str!("../configs/table1.default");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Domestic,
    Foreign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteModel {
    #[serde(default)]
    pub name: String,
    pub origin: Origin,
    /// Initial reserve figure of the site (also the default prior mean).
    pub reserve: f64,
    #[serde(rename = "yield")]
    pub yield_dist: Dist,
    pub loss: Dist,
    pub emission_factor: f64,
    #[serde(default)]
    pub restore_absorption: f64,
    #[serde(deserialize_with = "de_money")]
    pub transport_cost: f64,
}

impl SiteModel {
    pub fn is_domestic(&self) -> bool {
        self.origin == Origin::Domestic
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Costs {
    #[serde(deserialize_with = "de_money")]
    pub explore: f64,
    #[serde(deserialize_with = "de_money")]
    pub build: f64,
    #[serde(deserialize_with = "de_money")]
    pub restore: f64,
    #[serde(default, deserialize_with = "de_money")]
    pub operating: f64,
    #[serde(deserialize_with = "de_money")]
    pub processing: f64,
    #[serde(deserialize_with = "de_money")]
    pub domestic_penalty: f64,
    #[serde(deserialize_with = "de_money")]
    pub lithium_price: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandBand {
    pub from_year: u32,
    pub to_year: u32,
    #[serde(flatten)]
    pub dist: Dist,
}

/// Initial belief parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    /// Per-site prior means; defaults to each site's `reserve`.
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    /// Prior std shared by all sites unless `std_per_site` is given.
    #[serde(default = "default_prior_std")]
    pub std: f64,
    #[serde(default)]
    pub std_per_site: Option<Vec<f64>>,
}

fn default_prior_std() -> f64 {
    10_000.0
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            mean: None,
            std: default_prior_std(),
            std_per_site: None,
        }
    }
}

/// Ground-truth construction for the accurate/inaccurate scenarios:
/// `truth_j = mean_j + sign_j * offset * std_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub signs: Vec<f64>,
    #[serde(default = "default_accurate_offset")]
    pub accurate_offset: f64,
    #[serde(default = "default_inaccurate_offset")]
    pub inaccurate_offset: f64,
}

fn default_accurate_offset() -> f64 {
    1.0
}

fn default_inaccurate_offset() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: String,
    pub horizon: u32,
    pub discount: f64,
    pub extraction_factor: f64,
    pub delay_goal: u32,
    pub obs_noise: f64,
    pub reserve_bin: f64,
    pub obs_bin: f64,
    /// Upper clamp on binned readings (keeps tiny instances finite).
    #[serde(default)]
    pub obs_cap: Option<f64>,
    pub weights: [f64; 4],
    /// Multiplier from extracted-mass × emission factor to the CO₂ unit
    /// used by the emission term and the CO₂ metric.
    #[serde(default = "one")]
    pub emission_scale: f64,
    /// Apply the loss distribution to domestic sites too.
    #[serde(default)]
    pub apply_domestic_loss: bool,
    pub costs: Costs,
    #[serde(default)]
    pub belief: PriorSpec,
    #[serde(default)]
    pub scenarios: Option<ScenarioSpec>,
    pub sites: Vec<SiteModel>,
    pub demand: Vec<DemandBand>,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MoneyRepr {
    Plain(f64),
    Tagged { value: f64, unit: String },
}

/// Conversion factor from a money unit to $M.
pub fn money_unit_factor(unit: &str) -> Option<f64> {
    match unit.to_ascii_lowercase().as_str() {
        "usd" | "$" => Some(1e-6),
        "kusd" | "$k" => Some(1e-3),
        "musd" | "$m" => Some(1.0),
        "busd" | "$b" => Some(1e3),
        _ => None,
    }
}

fn de_money<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    match MoneyRepr::deserialize(d)? {
        MoneyRepr::Plain(v) => Ok(v),
        MoneyRepr::Tagged { value, unit } => money_unit_factor(&unit)
            .map(|f| value * f)
            .ok_or_else(|| {
                serde::de::Error::custom(format!(
                    "unknown money unit `{unit}` (expected usd, kusd, musd or busd)"
                ))
            }),
    }
}

impl ProblemConfig {
    /// The bundled default configuration.
    pub fn table1() -> Self {
        Self::from_toml_str(TABLE1_SOURCE, TABLE1_NAME).expect("bundled config is valid")
    }

    /// Parse and validate a config from TOML text.
    pub fn from_toml_str(source: &str, origin: &str) -> Result<Self> {
        let cfg: ProblemConfig = toml::from_str(source).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        let mut issues = cfg.validate();
        if !issues.is_empty() {
            for issue in &mut issues {
                issue.line = locate_line(source, &issue.field);
            }
            return Err(Error::InvalidConfig(issues));
        }
        Ok(cfg)
    }

    /// Load a config file; `table1.default` resolves to the bundled copy
    /// when no file of that name exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        if !path.exists() && path.file_name().is_some_and(|f| f == TABLE1_NAME) {
            return Self::from_toml_str(TABLE1_SOURCE, TABLE1_NAME);
        }
        let source = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: display.clone(),
            source,
        })?;
        Self::from_toml_str(&source, &display)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn is_domestic(&self, site: usize) -> bool {
        self.sites[site].is_domestic()
    }

    pub fn domestic_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_sites()).filter(|&j| self.is_domestic(j))
    }

    pub fn foreign_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_sites()).filter(|&j| !self.is_domestic(j))
    }

    /// Whether losses apply to deliveries from `site`.
    pub fn has_loss(&self, site: usize) -> bool {
        !self.is_domestic(site) || self.apply_domestic_loss
    }

    pub fn reserves(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.reserve).collect()
    }

    pub fn prior_mean(&self) -> Vec<f64> {
        self.belief.mean.clone().unwrap_or_else(|| self.reserves())
    }

    pub fn prior_std(&self) -> Vec<f64> {
        self.belief
            .std_per_site
            .clone()
            .unwrap_or_else(|| vec![self.belief.std; self.n_sites()])
    }

    /// Demand band covering `year` (1-based).
    pub fn demand_band(&self, year: u32) -> Option<&DemandBand> {
        self.demand
            .iter()
            .find(|b| b.from_year <= year && year <= b.to_year)
    }

    /// Check every invariant; empty means valid.
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut bad = |field: String, message: String| {
            issues.push(ConfigIssue {
                field,
                message,
                line: None,
            })
        };

        if !(self.discount > 0.0 && self.discount < 1.0) {
            bad("discount".into(), format!("must lie in (0, 1), got {}", self.discount));
        }
        if !(self.extraction_factor > 0.0 && self.extraction_factor <= 1.0) {
            bad(
                "extraction_factor".into(),
                format!("must lie in (0, 1], got {}", self.extraction_factor),
            );
        }
        if self.horizon == 0 {
            bad("horizon".into(), "must be at least 1".into());
        }
        if !(self.obs_noise >= 0.0 && self.obs_noise.is_finite()) {
            bad("obs_noise".into(), format!("must be finite and >= 0, got {}", self.obs_noise));
        }
        if !(self.reserve_bin > 0.0 && self.reserve_bin.is_finite()) {
            bad("reserve_bin".into(), format!("must be > 0, got {}", self.reserve_bin));
        }
        if !(self.obs_bin > 0.0 && self.obs_bin.is_finite()) {
            bad("obs_bin".into(), format!("must be > 0, got {}", self.obs_bin));
        }
        if let Some(cap) = self.obs_cap {
            if !(cap >= 0.0) {
                bad("obs_cap".into(), format!("must be >= 0, got {cap}"));
            }
        }
        for (i, w) in self.weights.iter().enumerate() {
            if !w.is_finite() {
                bad(format!("weights[{i}]"), format!("must be finite, got {w}"));
            }
        }
        if !(self.emission_scale >= 0.0 && self.emission_scale.is_finite()) {
            bad(
                "emission_scale".into(),
                format!("must be finite and >= 0, got {}", self.emission_scale),
            );
        }

        let c = &self.costs;
        for (name, v) in [
            ("explore", c.explore),
            ("build", c.build),
            ("restore", c.restore),
            ("operating", c.operating),
            ("processing", c.processing),
            ("domestic_penalty", c.domestic_penalty),
            ("lithium_price", c.lithium_price),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bad(format!("costs.{name}"), format!("must be finite and >= 0, got {v}"));
            }
        }

        if self.sites.is_empty() {
            bad("sites".into(), "at least one site is required".into());
        }
        for (j, s) in self.sites.iter().enumerate() {
            if !(s.reserve >= 0.0 && s.reserve.is_finite()) {
                bad(format!("sites[{j}].reserve"), format!("must be >= 0, got {}", s.reserve));
            }
            if !(s.emission_factor >= 0.0 && s.emission_factor.is_finite()) {
                bad(
                    format!("sites[{j}].emission_factor"),
                    format!("must be >= 0, got {}", s.emission_factor),
                );
            }
            if !s.restore_absorption.is_finite() || s.restore_absorption < 0.0 {
                bad(
                    format!("sites[{j}].restore_absorption"),
                    format!("must be >= 0, got {}", s.restore_absorption),
                );
            }
            if !(s.transport_cost >= 0.0 && s.transport_cost.is_finite()) {
                bad(
                    format!("sites[{j}].transport_cost"),
                    format!("must be >= 0, got {}", s.transport_cost),
                );
            }
            if let Some(msg) = s.yield_dist.check() {
                bad(format!("sites[{j}].yield"), msg);
            }
            if let Some(msg) = s.loss.check() {
                bad(format!("sites[{j}].loss"), msg);
            }
        }

        self.validate_demand(&mut bad);

        let n = self.sites.len();
        if let Some(m) = &self.belief.mean {
            if m.len() != n {
                bad("belief.mean".into(), format!("needs {n} entries, got {}", m.len()));
            }
            if m.iter().any(|v| !(*v >= 0.0)) {
                bad("belief.mean".into(), "entries must be >= 0".into());
            }
        }
        if !(self.belief.std >= 0.0 && self.belief.std.is_finite()) {
            bad("belief.std".into(), format!("must be >= 0, got {}", self.belief.std));
        }
        if let Some(s) = &self.belief.std_per_site {
            if s.len() != n {
                bad("belief.std_per_site".into(), format!("needs {n} entries, got {}", s.len()));
            }
            if s.iter().any(|v| !(*v >= 0.0)) {
                bad("belief.std_per_site".into(), "entries must be >= 0".into());
            }
        }
        if let Some(sc) = &self.scenarios {
            if sc.signs.len() != n {
                bad("scenarios.signs".into(), format!("needs {n} entries, got {}", sc.signs.len()));
            }
            if sc.signs.iter().any(|s| !(*s == 1.0 || *s == -1.0)) {
                bad("scenarios.signs".into(), "entries must be +1 or -1".into());
            }
            if !(sc.accurate_offset >= 0.0 && sc.accurate_offset <= 1.96) {
                bad(
                    "scenarios.accurate_offset".into(),
                    format!("must lie in [0, 1.96], got {}", sc.accurate_offset),
                );
            }
            if !(sc.inaccurate_offset >= 3.0 && sc.inaccurate_offset.is_finite()) {
                bad(
                    "scenarios.inaccurate_offset".into(),
                    format!("must be >= 3, got {}", sc.inaccurate_offset),
                );
            }
        }
        issues
    }

    fn validate_demand(&self, bad: &mut impl FnMut(String, String)) {
        let mut owner: Vec<Option<usize>> = vec![None; self.horizon as usize + 1];
        for (k, band) in self.demand.iter().enumerate() {
            if band.from_year == 0 || band.from_year > band.to_year {
                bad(
                    format!("demand[{k}]"),
                    format!(
                        "year range {}..{} is empty or starts before year 1",
                        band.from_year, band.to_year
                    ),
                );
                continue;
            }
            if let Some(msg) = band.dist.check() {
                bad(format!("demand[{k}]"), msg);
            }
            if let Some(v) = band.dist.support().map(|s| s.iter().any(|(v, _)| *v < 0.0)) {
                if v {
                    bad(format!("demand[{k}]"), "demand values must be >= 0".into());
                }
            }
            if let Dist::Uniform { low, .. } = band.dist {
                if low < 0.0 {
                    bad(format!("demand[{k}]"), "demand must be >= 0".into());
                }
            }
            let mut overlap = Vec::new();
            for year in band.from_year..=band.to_year {
                if year as usize >= owner.len() {
                    continue;
                }
                match owner[year as usize] {
                    Some(other) => overlap.push((year, other)),
                    None => owner[year as usize] = Some(k),
                }
            }
            if let (Some(first), Some(last)) = (overlap.first(), overlap.last()) {
                bad(
                    format!("demand[{k}]"),
                    format!(
                        "overlaps demand[{}] in years {}..{}",
                        first.1, first.0, last.0
                    ),
                );
            }
        }
        let missing: Vec<u32> = (1..=self.horizon)
            .filter(|&y| owner[y as usize].is_none())
            .collect();
        if !missing.is_empty() {
            bad(
                "demand".into(),
                format!("years {} are not covered by any band", compress_years(&missing)),
            );
        }
    }
}

fn compress_years(years: &[u32]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < years.len() {
        let start = years[i];
        let mut end = start;
        while i + 1 < years.len() && years[i + 1] == end + 1 {
            i += 1;
            end = years[i];
        }
        parts.push(if start == end {
            start.to_string()
        } else {
            format!("{start}..{end}")
        });
        i += 1;
    }
    parts.join(", ")
}

/// Best-effort 1-based line of a dotted field path such as
/// `sites[2].yield.std` or `costs.build` in TOML source text.
pub fn locate_line(source: &str, field: &str) -> Option<usize> {
    let lines: Vec<&str> = source.lines().collect();
    let (head, rest) = match field.split_once('.') {
        Some((h, r)) => (h, Some(r)),
        None => (field, None),
    };
    let (table, index) = match head.split_once('[') {
        Some((t, idx)) => (t, idx.trim_end_matches(']').parse::<usize>().ok()),
        None => (head, None),
    };
    let key_of = |l: &str| -> Option<String> {
        let l = l.trim_start();
        let end = l.find(|c: char| c == '=' || c.is_whitespace())?;
        Some(l[..end].to_string())
    };
    let is_header = |l: &str| l.trim_start().starts_with('[');

    // array-of-tables entries
    if let Some(idx) = index {
        let header = format!("[[{table}]]");
        let start = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.trim() == header)
            .nth(idx)
            .map(|(i, _)| i);
        let start = match start {
            Some(s) => s,
            // inline arrays such as `weights = [...]`
            None => {
                return lines
                    .iter()
                    .position(|l| !is_header(l) && key_of(l).as_deref() == Some(table))
                    .map(|i| i + 1)
            }
        };
        if let Some(r) = rest {
            let key = r.split('.').next().unwrap_or(r);
            for (i, l) in lines.iter().enumerate().skip(start + 1) {
                if is_header(l) {
                    break;
                }
                if key_of(l).as_deref() == Some(key) {
                    return Some(i + 1);
                }
            }
        }
        return Some(start + 1);
    }

    match rest {
        Some(r) => {
            let header = format!("[{table}]");
            let key = r.split('.').next().unwrap_or(r);
            let start = lines.iter().position(|l| l.trim() == header)?;
            for (i, l) in lines.iter().enumerate().skip(start + 1) {
                if is_header(l) {
                    break;
                }
                if key_of(l).as_deref() == Some(key) {
                    return Some(i + 1);
                }
            }
            Some(start + 1)
        }
        None => {
            for (i, l) in lines.iter().enumerate() {
                if is_header(l) {
                    if l.trim() == format!("[{table}]") || l.trim() == format!("[[{table}]]") {
                        return Some(i + 1);
                    }
                    continue;
                }
                if key_of(l).as_deref() == Some(table) {
                    return Some(i + 1);
                }
            }
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_matches_table() {
        let c = ProblemConfig::table1();
        assert_eq!(c.n_sites(), 4);
        assert_eq!(c.domestic_sites().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(c.foreign_sites().collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(c.horizon, 30);
        assert_eq!(c.discount, 0.97);
        assert_eq!(c.extraction_factor, 0.08);
        assert_eq!(c.delay_goal, 10);
        assert_eq!(c.obs_noise, 6000.0);
        assert_eq!(c.reserve_bin, 1000.0);
        assert_eq!(c.weights, [0.5, 3.2, 0.5, 0.5]);
        assert_eq!(c.costs.explore, 50.0);
        assert_eq!(c.costs.build, 400.0);
        assert_eq!(c.costs.restore, 100.0);
        assert_eq!(c.costs.domestic_penalty, 100.0);
        assert_eq!(c.costs.operating, 0.0);
        assert!((c.costs.processing - 0.003).abs() < 1e-15);
        assert!((c.costs.lithium_price - 0.015).abs() < 1e-15);
        assert_eq!(c.reserves(), vec![100000.0, 50000.0, 100000.0, 50000.0]);
        assert_eq!(c.sites[0].yield_dist, Dist::normal(5000.0, 50.0));
        assert_eq!(c.sites[1].yield_dist, Dist::normal(2000.0, 50.0));
        assert_eq!(c.sites[2].loss, Dist::normal(100.0, 10.0));
        assert_eq!(c.sites[0].loss, Dist::normal(1.0, 0.2));
        let e: Vec<f64> = c.sites.iter().map(|s| s.emission_factor).collect();
        assert_eq!(e, vec![3.0, 4.0, 6.0, 7.0]);
        assert!((c.sites[0].transport_cost - 0.001e-6).abs() < 1e-18);
        assert!((c.sites[2].transport_cost - 0.05e-6).abs() < 1e-18);
        assert_eq!(c.demand.len(), 4);
        assert_eq!(c.demand[3].dist, Dist::uniform(400.0, 600.0));
        assert_eq!(c.prior_std(), vec![10000.0; 4]);
        assert!(c.validate().is_empty());
    }

    fn with(edit: impl FnOnce(&mut String)) -> Result<ProblemConfig> {
        let mut src = TABLE1_SOURCE.to_string();
        edit(&mut src);
        ProblemConfig::from_toml_str(&src, "test")
    }

    #[test]
    fn discount_out_of_range_is_reported_with_line() {
        let err = with(|s| *s = s.replace("discount = 0.97", "discount = 1.2")).unwrap_err();
        match err {
            Error::InvalidConfig(issues) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].field, "discount");
                let line = issues[0].line.unwrap();
                let src = TABLE1_SOURCE.replace("discount = 0.97", "discount = 1.2");
                assert!(src.lines().nth(line - 1).unwrap().starts_with("discount"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlapping_bands_name_the_years() {
        let err = with(|s| *s = s.replace("from_year = 6", "from_year = 4")).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("overlaps demand[0] in years 4..5"), "{text}");
    }

    #[test]
    fn uncovered_years_are_reported() {
        let err = with(|s| *s = s.replace("to_year = 30", "to_year = 28")).unwrap_err();
        assert!(err.to_string().contains("years 29..30 are not covered"));
    }

    #[test]
    fn negative_std_is_reported() {
        let err = with(|s| *s = s.replacen("std = 50", "std = -1", 1)).unwrap_err();
        let Error::InvalidConfig(issues) = err else { panic!() };
        assert_eq!(issues[0].field, "sites[0].yield");
        assert!(issues[0].line.is_some());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = with(|s| s.push_str("\nbroken = = 1\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn unknown_money_unit_is_rejected() {
        let err = with(|s| *s = s.replacen("unit = \"musd\"", "unit = \"eur\"", 1)).unwrap_err();
        assert!(err.to_string().contains("unknown money unit"));
    }

    #[test]
    fn toml_round_trip() {
        let c = ProblemConfig::table1();
        let back = ProblemConfig::from_toml_str(&c.to_toml(), "rt").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn load_resolves_bundled_name() {
        let c = ProblemConfig::load(TABLE1_NAME).unwrap();
        assert_eq!(c, ProblemConfig::table1());
        assert!(ProblemConfig::load("/nonexistent/other.toml").is_err());
    }
}
