//! Runner errors and their process exit codes.

use thiserror::Error;

/// Failures of a scenario run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    /// The scenario, its family or its parameters are invalid (exit code 2).
    #[error("validation error: {0}")]
    Validation(String),
    /// A verified identity missed its tolerance (exit code 3).
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}
