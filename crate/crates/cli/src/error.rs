use std::path::PathBuf;

/// Failure of a CLI command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {what}: {msg}")]
    Parse { what: String, msg: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("estimation did not converge (defect {residual:.3e} after {iterations} iterations)")]
    NotConverged { residual: f64, iterations: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::NotConverged { .. } => 4,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, msg: impl ToString) -> Self {
        CliError::Parse { what: what.into(), msg: msg.to_string() }
    }
}

impl From<qtomo_core::Error> for CliError {
    fn from(e: qtomo_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
