use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Library-level failure modes. Validation findings that should be reported
/// in bulk go through `slices::ValidationReport` instead.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Exact enumeration refused: the table would have 2^k (or more) rows.
    #[error("{k} slices exceed the exact-enumeration limit of {limit}")]
    TooManySlices { k: usize, limit: usize },

    /// Inverse-covariance edge selection hit a singular matrix.
    #[error(
        "covariance matrix is singular; drop constant or duplicate slices or supply edges manually"
    )]
    SingularCovariance,

    /// Objective or gradient became non-finite during optimization.
    #[error("non-finite objective at |delta|_inf = {delta_norm}")]
    NonFiniteObjective { delta_norm: f64 },

    /// A concave objective decreased across a full line search: implementation bug.
    #[error("objective decreased across a full line search: {0}")]
    Diverged(String),

    /// A linear system could not be solved even after regularization retries.
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// A weight vector with zero total mass cannot be normalized or summarized.
    #[error("weights are all zero")]
    AllZeroWeights,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
