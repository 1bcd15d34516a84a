use std::fmt;
use std::path::PathBuf;

use crate::money::Money;

/// A single validation failure, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation failed: {}", join(.0))]
    Validation(Vec<FieldError>),

    #[error("holder {holder} has {held} shares, cannot move {requested}")]
    InsufficientShares { holder: String, held: u64, requested: u64 },

    #[error("cap table has no issued shares")]
    EmptyCapTable,

    #[error("unbalanced transaction: debits {debits}, credits {credits}")]
    Unbalanced { debits: Money, credits: Money },

    #[error("length mismatch: {services} services but {usages} usage values")]
    LengthMismatch { services: usize, usages: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: expected {expected}, found {found}")]
    InvalidState { expected: &'static str, found: String },

    #[error("funding round already settled")]
    AlreadySettled,

    #[error("funding window still open until month {closes}")]
    WindowOpen { closes: u32 },

    #[error("ESOP already granted")]
    EsopAlreadyGranted,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("instance too large for exhaustive search ({assignments} assignments > {limit}); use optimize_portfolio")]
    InstanceTooLarge { assignments: f64, limit: u64 },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation(vec![FieldError::new(path, message)])
    }

    /// Errors caused by bad input rather than a failure while running.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Infeasible(_)
                | Error::InstanceTooLarge { .. }
                | Error::Parse { .. }
                | Error::Io { .. }
        )
    }

    /// Process exit code: 2 for bad input, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        if self.is_input_error() {
            2
        } else {
            3
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
