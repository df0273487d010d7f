use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("derivative of order {requested} requested from `{name}`, which provides up to order {available}")]
    OrderUnavailable {
        name: String,
        requested: usize,
        available: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Euler scheme diverged for sample {sample} at step {step}")]
    Divergence { sample: u64, step: usize },

    #[error("all {samples} samples aborted")]
    AllSamplesAborted { samples: usize },

    #[error("missing component measure `{0}`")]
    MissingComponent(&'static str),

    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}
