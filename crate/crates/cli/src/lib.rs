//! Command-line runner: parses a JSON configuration, dispatches one of the
//! five modes and writes CSV time series and JSON summaries to an output
//! directory.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

pub use commands::run;
pub use config::{parse_config, parse_str, Config, Mode};

/// Failure classes; each maps to one exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Malformed or mistyped configuration, with the field path.
    Schema { path: String, message: String },
    /// Well-formed configuration that violates a numeric or cross-field rule.
    Constraint(String),
    /// A certification check exceeded its tolerance.
    Certification(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Constraint(_) => 2,
            CliError::Certification(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Schema { .. } => "schema_error",
            CliError::Constraint(_) => "constraint_error",
            CliError::Certification(_) => "certification_failure",
            CliError::Runtime(_) => "runtime_error",
        }
    }

    /// Machine-readable failure record.
    pub fn record(&self, mode: Option<Mode>) -> FailureRecord {
        let (path, message) = match self {
            CliError::Schema { path, message } => (Some(path.clone()), message.clone()),
            CliError::Constraint(m) | CliError::Certification(m) | CliError::Runtime(m) => (None, m.clone()),
        };
        FailureRecord { kind: self.kind(), exit_code: self.exit_code(), mode: mode.map(Mode::name), path, message }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema { path, message } => write!(f, "schema error at {path}: {message}"),
            CliError::Constraint(m) => write!(f, "constraint error: {m}"),
            CliError::Certification(m) => write!(f, "certification failed: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<nullframe::Error> for CliError {
    fn from(e: nullframe::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub kind: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub message: String,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Number of grid resolutions N, 1.5N, 2N, ...
    pub refine: Option<usize>,
}
