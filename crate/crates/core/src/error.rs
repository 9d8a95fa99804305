use thiserror::Error;

pub type Result<T> = std::result::Result<T, DivError>;

/// Every failure a divergence computation can report.
#[derive(Debug, Error)]
pub enum DivError {
    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coincident points (a[{i}], b[{j}]) under a negative power kernel")]
    SingularPair { i: usize, j: usize },

    #[error("moment of order {order} differs ({detail}): |difference| = {difference:e} exceeds tolerance {tolerance:e}")]
    MomentMismatch {
        order: usize,
        detail: String,
        difference: f64,
        tolerance: f64,
    },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("inadmissible order: {0}")]
    Inadmissible(String),

    #[error("density is not normalized: mass {mass}")]
    NotNormalized { mass: f64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("degenerate transport basis: {0}")]
    DegenerateBasis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl DivError {
    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            DivError::Csv { .. } => "csv",
            DivError::Io(_) => "io",
            DivError::Json(_) => "json",
            DivError::InvalidInput(_) => "invalid_input",
            DivError::DimensionMismatch { .. } => "dimension_mismatch",
            DivError::SingularPair { .. } => "singular_pair",
            DivError::MomentMismatch { .. } => "moment_mismatch",
            DivError::DegenerateCovariance(_) => "degenerate_covariance",
            DivError::Inadmissible(_) => "inadmissible",
            DivError::NotNormalized { .. } => "not_normalized",
            DivError::SupportViolation(_) => "support_violation",
            DivError::TooLarge(_) => "too_large",
            DivError::DegenerateBasis(_) => "degenerate_basis",
            DivError::Numerical(_) => "numerical",
        }
    }
}
