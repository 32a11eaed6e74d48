use thiserror::Error;

/// Errors produced by construction and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("block partitions do not match ({context})")]
    PartitionMismatch { context: &'static str },

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("invalid sampling scheme: {0}")]
    InvalidScheme(String),

    #[error("sampling support too large to enumerate ({atoms} atoms > {limit}); use the closed-form constants")]
    SupportTooLarge { atoms: u128, limit: u128 },

    #[error("invalid separability structure: {0}")]
    InvalidStructure(String),

    #[error("missing data: {0}")]
    MissingData(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("prox evaluation failed on block {block}: {reason}")]
    ProxFailure { block: usize, reason: String },

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("bound inapplicable: {0}")]
    BoundInapplicable(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
