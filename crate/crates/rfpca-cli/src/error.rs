//! CLI-level errors and their mapping onto process exit codes.
//!
//! The estimation library groups its failures by class (invalid input,
//! solver failure, sample too small); the CLI adds filesystem and
//! configuration failures and flattens everything onto four documented
//! exit codes.

use std::path::PathBuf;

use thiserror::Error;

// ===== exit codes =====

/// Process exit codes of the `rfpca` binary.
pub mod exit_code {
    /// Command completed and all artifacts were written.
    pub const SUCCESS: i32 = 0;
    /// Invalid input data, configuration, or argument values.
    pub const VALIDATION: i32 = 2;
    /// Iterative solver ran out of iterations, or the problem was too
    /// degenerate numerically for a stable answer.
    pub const CONVERGENCE: i32 = 3;
    /// Too few observations for the requested estimator.
    pub const INSUFFICIENT_SAMPLE: i32 = 4;
    /// Reading or writing a file failed.
    pub const IO: i32 = 5;
}

/// Convenient alias used throughout the CLI crate.
pub type CliResult<T> = std::result::Result<T, CliError>;

// ===== error type =====

/// Everything that can abort a command.
#[derive(Debug, Error)]
pub enum CliError {
    /// Estimation-layer failure, forwarded verbatim.
    #[error(transparent)]
    Lib(#[from] rfpca::Error),

    /// Filesystem failure, annotated with the offending path.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed configuration or input file, with file/line context.
    #[error("{}:{line}: {reason}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        reason: String,
    },

    /// Argument combination the type system cannot rule out.
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// The exit code this error maps onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) => lib_exit_code(e),
            CliError::Io { .. } => exit_code::IO,
            CliError::Parse { .. } | CliError::Usage(_) => exit_code::VALIDATION,
        }
    }

    /// Shorthand for a [`CliError::Parse`].
    pub fn parse(file: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        CliError::Parse {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }
}

/// Builds the closure `map_err` wants for I/O failures on `path`.
pub fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

/// Classifies an estimation error, looking through the time-index wrapper so
/// the innermost failure decides the code.
fn lib_exit_code(err: &rfpca::Error) -> i32 {
    use rfpca::Error;
    match err {
        Error::AtTime { source, .. } => lib_exit_code(source),
        Error::InvalidInput { .. }
        | Error::DimensionMismatch { .. }
        | Error::ConcentrationViolation { .. }
        | Error::AntipodalPoints { .. } => exit_code::VALIDATION,
        Error::Convergence { .. } | Error::IllConditioned { .. } => exit_code::CONVERGENCE,
        Error::InsufficientSample { .. } => exit_code::INSUFFICIENT_SAMPLE,
    }
}

// ===== tests =====
