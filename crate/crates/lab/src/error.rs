use std::path::PathBuf;

use ist_core::Error as CoreError;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// A verification step (acceptance criterion, manifest replay) failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Bad command line, unreadable or invalid configuration, invalid parameter.
pub const EXIT_USAGE: i32 = 2;
/// A numerical routine did not converge or a resource bound was hit.
pub const EXIT_NUMERIC: i32 = 3;
/// The model is outside the regime the request needs.
pub const EXIT_REGIME: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    CheckFailed(String),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        LabError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Short machine-readable code, printed next to the message.
    pub fn code(&self) -> &'static str {
        match self {
            LabError::Config { .. } => "config",
            LabError::Usage(_) => "usage",
            LabError::Io { .. } => "io",
            LabError::Format { .. } => "format",
            LabError::CheckFailed(_) => "check_failed",
            LabError::Core(e) => match e {
                CoreError::Ordering { .. } => "ordering",
                CoreError::InvalidParameter { .. } => "invalid_parameter",
                CoreError::OutOfRange { .. } => "out_of_range",
                CoreError::Unsupported(_) => "unsupported",
                CoreError::Integration { .. } => "integration",
                CoreError::Explosion { .. } => "explosion",
                CoreError::TreeTooLarge { .. } => "tree_too_large",
                CoreError::Convergence { .. } => "convergence",
                CoreError::Consistency(_) => "consistency",
                CoreError::DegenerateBarrier { .. } => "degenerate_barrier",
                CoreError::DegenerateConditioning { .. } => "degenerate_conditioning",
                CoreError::Regime(_) => "regime",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } | LabError::Usage(_) => EXIT_USAGE,
            LabError::Io { .. } | LabError::Format { .. } => EXIT_USAGE,
            LabError::CheckFailed(_) => EXIT_CHECK_FAILED,
            LabError::Core(e) => match e {
                CoreError::Ordering { .. }
                | CoreError::InvalidParameter { .. }
                | CoreError::OutOfRange { .. } => EXIT_USAGE,
                CoreError::Integration { .. }
                | CoreError::Explosion { .. }
                | CoreError::TreeTooLarge { .. }
                | CoreError::Convergence { .. }
                | CoreError::Consistency(_) => EXIT_NUMERIC,
                CoreError::Unsupported(_)
                | CoreError::DegenerateBarrier { .. }
                | CoreError::DegenerateConditioning { .. }
                | CoreError::Regime(_) => EXIT_REGIME,
            },
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
