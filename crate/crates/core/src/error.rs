//! Crate-wide error type with a stable mapping onto CLI exit codes.

use thiserror::Error;

/// Exit codes used by the command-line interface.
///
/// * `2` — malformed or missing input (files, arguments, parameter domains)
/// * `3` — inputs parse but are mutually inconsistent (span mismatches,
///   date gaps, schedule violations)
/// * `4` — an optimizer finished its budget without converging
/// * `5` — a pipeline stage was invoked before the stage it depends on
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;
pub const EXIT_MISSING_STAGE: i32 = 5;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad file contents, out-of-domain parameters,
    /// unparsable dates or numbers.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// I/O failure while reading or writing a file.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Structured-file parse failure with position information.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    /// Inputs are individually valid but mutually inconsistent.
    #[error("data consistency: {0}")]
    DataConsistency(String),

    /// Optimizer exhausted its budget above the convergence threshold.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A required earlier pipeline stage has not produced its output.
    #[error("missing stage dependency: {0}")]
    MissingStage(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::DataConsistency(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Io { .. } | Error::Parse { .. } => EXIT_INPUT,
            Error::DataConsistency(_) => EXIT_DATA,
            Error::NoConvergence(_) => EXIT_NO_CONVERGENCE,
            Error::MissingStage(_) => EXIT_MISSING_STAGE,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_match_contract() {
        assert_eq!(Error::invalid("x").exit_code(), 2);
        assert_eq!(
            Error::io("f", std::io::Error::new(std::io::ErrorKind::NotFound, "gone")).exit_code(),
            2
        );
        assert_eq!(Error::data("x").exit_code(), 3);
        assert_eq!(Error::NoConvergence("x".into()).exit_code(), 4);
        assert_eq!(Error::MissingStage("x".into()).exit_code(), 5);
    }
}
