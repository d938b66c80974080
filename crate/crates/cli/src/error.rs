use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use reachnet_core::axisset::AxisError;
use reachnet_core::fixpoint::FixpointError;
use reachnet_core::reachability::ReachError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_MAX_ROUNDS: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column} ({path}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Fixpoint(#[from] FixpointError),
    #[error(transparent)]
    Axis(#[from] AxisError),
}

/// Machine-readable failure written to `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

fn fixpoint_code(e: &FixpointError) -> i32 {
    match e {
        FixpointError::MaxRoundsExceeded { .. } => EXIT_MAX_ROUNDS,
        FixpointError::BadTolerance(_) | FixpointError::ZeroRounds | FixpointError::NoNodes | FixpointError::BackendMismatch => {
            EXIT_VALIDATION
        }
        FixpointError::Axis(_) | FixpointError::Step { .. } => EXIT_NUMERICAL,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Invalid { .. } => EXIT_VALIDATION,
            CliError::Reach(ReachError::Fixpoint(e)) | CliError::Fixpoint(e) => fixpoint_code(e),
            // the oracle refuses the input size; nothing numerical went wrong
            CliError::Reach(ReachError::DimensionCapExceeded { .. }) => EXIT_VALIDATION,
            CliError::Reach(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Reach(_) | CliError::Axis(_) => EXIT_NUMERICAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_MAX_ROUNDS => "max_rounds_exceeded",
            EXIT_NUMERICAL => "numerical_failure",
            _ => match self {
                CliError::Io { .. } => "io_error",
                CliError::Parse { .. } => "parse_error",
                _ => "validation_error",
            },
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (field, line, column) = match self {
            CliError::Parse { path, line, column, .. } => (Some(path.clone()), Some(*line), Some(*column)),
            CliError::Invalid { field, .. } => (Some(field.clone()), None, None),
            _ => (None, None, None),
        };
        ErrorRecord {
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            field,
            line,
            column,
        }
    }
}
