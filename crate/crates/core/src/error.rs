use thiserror::Error;

/// Errors raised by solvers, learners and I/O helpers.
#[derive(Debug, Error)]
pub enum SparseError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver `{solver}` does not accept a {constraint} constraint")]
    UnsupportedConstraint {
        solver: &'static str,
        constraint: &'static str,
    },

    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("model has no classifier matrix")]
    MissingClassifier,

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SparseError>;
