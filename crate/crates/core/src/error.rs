use thiserror::Error;

pub type Result<T> = std::result::Result<T, CdError>;

#[derive(Debug, Error)]
pub enum CdError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index mismatch: expected {expected} entries, got {got}")]
    IndexMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("epsilon search failed: best budget {best_budget:.6e} at eps={best_eps:e} (threshold {threshold})")]
    EpsilonSearchFailed {
        best_eps: f64,
        best_budget: f64,
        threshold: f64,
        trace: Vec<(f64, f64)>,
    },

    #[error("Neumann series refused: budget {budget:.6e} exceeds 1/2")]
    BudgetExceeded { budget: f64 },

    #[error("singular section (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("not a frame: lower frame bound {lower:.3e}, upper {upper:.3e}")]
    NotAFrame { lower: f64, upper: f64 },

    #[error("frame is not tight with constant 1 (bounds {lower:.12}, {upper:.12})")]
    NotTight { lower: f64, upper: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CdError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        CdError::Parameter(msg.into())
    }
}
