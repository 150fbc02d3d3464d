use std::fmt;

use defi_rank_core::EvalError;
use serde::Serialize;

/// A failed command: a stable code, a message, and the process exit status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    pub exit: u8,
}

impl CliError {
    pub fn usage(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into(), exit: 2 }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let exit = if matches!(e, EvalError::AllDatesFailed) { 3 } else { 2 };
        Self { code: e.code().to_string(), message: e.to_string(), exit }
    }
}
