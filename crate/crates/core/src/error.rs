use std::fmt;

use crate::model::Configuration;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyConfigSpace,
    InvalidFunction { id: String, reason: String },
    InvalidDag { app: String, reason: String },
    MultipleEntries { app: String, entries: Vec<String> },
    MissingProfile { function: String, config: Option<Configuration> },
    InvalidProfile { function: String, reason: String },
    UnsortedProfile { function: String, position: usize },
    DegenerateAnl,
    UnschedulableConfiguration { config: Configuration },
    OracleIntractable { group_size: usize, max_configs: usize },
    InvalidScenario { field: String, reason: String },
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyConfigSpace => write!(f, "empty configuration space"),
            Error::InvalidFunction { id, reason } => write!(f, "invalid function `{id}`: {reason}"),
            Error::InvalidDag { app, reason } => write!(f, "invalid application `{app}`: {reason}"),
            Error::MultipleEntries { app, entries } => write!(
                f,
                "DAG must have unique entry (application `{app}` has {})",
                entries.join(", ")
            ),
            Error::MissingProfile { function, config: Some(c) } => {
                write!(f, "missing profile entry for function `{function}` at {c}")
            }
            Error::MissingProfile { function, config: None } => {
                write!(f, "missing profile for function `{function}`")
            }
            Error::InvalidProfile { function, reason } => {
                write!(f, "invalid profile for function `{function}`: {reason}")
            }
            Error::UnsortedProfile { function, position } => write!(
                f,
                "profile view for function `{function}` is not sorted by latency at position {position}"
            ),
            Error::DegenerateAnl => write!(f, "degenerate ANL labels"),
            Error::UnschedulableConfiguration { config } => {
                write!(f, "unschedulable configuration {config}")
            }
            Error::OracleIntractable { group_size, max_configs } => write!(
                f,
                "oracle intractable (group of {group_size} functions, up to {max_configs} configurations each)"
            ),
            Error::InvalidScenario { field, reason } => write!(f, "{field}: {reason}"),
            Error::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidScenario { field: format!("line {}, column {}", e.line(), e.column()), reason: e.to_string() }
    }
}
