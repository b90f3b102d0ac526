use thiserror::Error;

/// Errors raised by the optimization core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid bounds in dimension {dim}: lower {lower} must be strictly below upper {upper}")]
    InvalidBounds { dim: usize, lower: f64, upper: f64 },
    #[error("search space must have at least one dimension")]
    EmptySpace,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point lies outside the search space (dimension {dim})")]
    OutOfBounds { dim: usize },
    #[error("cost must be finite, got {0}")]
    NonFiniteCost(f64),
    #[error("numerical failure: {0}")]
    Numeric(&'static str),
    #[error("log expected improvement needs a positive incumbent, got {0}")]
    NonPositiveIncumbent(f64),
    #[error("evaluation budget of {0} exhausted")]
    BudgetExhausted(usize),
    #[error("at least one observation is required")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("iteration {t}: {cause}")]
    AtIteration { t: usize, cause: alloc::boxed::Box<Error> },
}

pub type Result<T> = core::result::Result<T, Error>;
