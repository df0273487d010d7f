use sobolev_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{0}")]
    Core(CoreError),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Divergence { .. } | CoreError::AllSamplesAborted { .. } => CliError::Divergence(e.to_string()),
            CoreError::UnknownFixture(_) | CoreError::Infeasible(_) => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// 0 ok, 1 assertion failure, 2 configuration error, 3 numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) => 1,
            CliError::Config(_) | CliError::Core(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Io(_) => 2,
        }
    }
}
