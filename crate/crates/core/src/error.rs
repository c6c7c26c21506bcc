use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} users, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("exhaustive KKT enumeration refuses K = {k} (limit {limit})")]
    TooManyUsers { k: usize, limit: usize },

    #[error("grid search would visit {points:.3e} points (limit 1e9)")]
    GridTooLarge { points: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by user input rather than by a solver.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Solver(_))
    }
}
