use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power bisection for precoder {user} did not bracket after {iters} doublings")]
    Bisection { user: usize, iters: usize },

    #[error("penalty runaway: rho = {rho:e} with constraint gap {gap:e}")]
    PenaltyRunaway { rho: f64, gap: f64 },

    #[error("non-finite value after the {block} update")]
    NonFinite { block: &'static str },

    #[error("objective decreased at iteration {iteration}: {previous} -> {current}")]
    Monotonicity {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
