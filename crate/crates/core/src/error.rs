use std::fmt;

use thiserror::Error;

use crate::domain::Action;

pub type Result<T> = std::result::Result<T, Error>;

/// A single violated configuration invariant.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConfigIssue {
    /// Dotted path of the offending field, e.g. `sites[2].yield.std`.
    pub field: String,
    pub message: String,
    /// 1-based line in the source file, when the field could be located.
    pub line: Option<usize>,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {}: {}: {}", line, self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },

    #[error("config has {} invariant violation(s):\n{}", .0.len(), join_issues(.0))]
    InvalidConfig(Vec<ConfigIssue>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("action {action} is not valid at t={t}")]
    InvalidAction { action: Action, t: u32 },

    #[error("episode is over (t={t} reached the horizon)")]
    EpisodeOver { t: u32 },

    #[error("no demand band covers year {0}")]
    DemandOutOfRange(u32),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("instance too large for exact solution: {0}")]
    InstanceTooLarge(String),

    #[error("unknown policy `{name}`; valid names: {valid}")]
    UnknownPolicy { name: String, valid: String },

    #[error("output error: {0}")]
    Output(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Output(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Output(e.to_string())
    }
}
