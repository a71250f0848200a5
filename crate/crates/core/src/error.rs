use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    /// A scale estimate collapsed to zero. `observation` is set when the
    /// collapse only happens after deleting that row.
    #[error("degenerate scale in column {column}{}", observation.map(|k| format!(" after removing observation {k}")).unwrap_or_default())]
    DegenerateScale {
        column: usize,
        observation: Option<usize>,
    },

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension error: {0}")]
    DimensionError(String),

    #[error("singular design matrix{}", observation.map(|k| format!(" after removing observation {k}")).unwrap_or_default())]
    SingularDesign { observation: Option<usize> },

    #[error("observation {0} has leverage 1")]
    ExactLeverage(usize),

    #[error("degenerate fit: residual variance is zero")]
    DegenerateFit,

    #[error("all model fits failed: {0}")]
    FitFailure(String),

    #[error("no convergence after {iterations} iterations (last max change {max_change:e})")]
    ConvergenceFailure { iterations: usize, max_change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
