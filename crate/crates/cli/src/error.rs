use rigidity_lab::LabError;
use thiserror::Error;

/// Failures of a CLI run, each mapped to a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// Quadrature did not converge or sampling hit a numeric anomaly (exit 3).
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// Reading the config or writing results failed (exit 4).
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub(crate) fn field(name: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{name}: {msg}"))
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::NonConvergence(_) | LabError::NumericAnomaly(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}
