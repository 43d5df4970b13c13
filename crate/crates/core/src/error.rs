use thiserror::Error;

/// Errors raised by the clearing engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClearingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Contract structure that cannot be evaluated, e.g. a cyclic insurance chain.
    #[error("structural error: {0}")]
    Structural(String),

    /// An iterative solver ran out of budget. Carries the best residual seen.
    #[error("no convergence after {iterations} iterations (best residual {residual:e}): {context}")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
        context: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("missing history: period {needed} requires {needed} prior periods, {available} available")]
    MissingHistory { needed: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, ClearingError>;
