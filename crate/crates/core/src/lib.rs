//! Sequential decision toolkit for critical-mineral sourcing under
//! geological uncertainty.
//!
//! The crate contains a stochastic multi-site mining and import simulator
//! ([`dynamics`]), a Gaussian belief over reserves ([`belief`]), online
//! belief-space planners with an exact small-instance oracle ([`planners`]),
//! baseline policies ([`baselines`]) and a seeded benchmark harness
//! ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod belief;
pub mod config;
pub mod dist;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod planners;

pub use belief::GaussianBelief;
pub use config::{ProblemConfig, SiteModel};
pub use dist::{CrnNoise, Dist, MeanNoise, Noise, RngNoise, ScenarioNoise, Stream};
pub use domain::{Action, Observables, Observation, State};
pub use dynamics::{RewardBreakdown, StepOutcome};
pub use error::{ConfigIssue, Error, Result};

/// Belief over reserves in double precision.
pub type Belief = GaussianBelief<f64>;
