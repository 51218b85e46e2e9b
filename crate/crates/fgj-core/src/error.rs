use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FgjError {
    #[error("invalid gap set: {0}")]
    GapSet(String),
    #[error("invalid periodic tail: {0}")]
    Tail(String),
    #[error("invalid operator: {0}")]
    Construction(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature failed: {message} (best estimate {estimate})")]
    Quadrature { message: String, estimate: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("discretization exhausted: a_{index} lost positivity")]
    Truncation { index: usize },
}

impl FgjError {
    /// Stable machine-readable code used by the scenario runner.
    pub fn code(&self) -> &'static str {
        match self {
            FgjError::GapSet(_) => "gapset.invalid",
            FgjError::Tail(_) => "tail.invalid",
            FgjError::Construction(_) => "operator.invalid",
            FgjError::Domain(_) => "domain",
            FgjError::Quadrature { .. } => "quadrature",
            FgjError::Numeric(_) => "numeric",
            FgjError::Consistency(_) => "consistency",
            FgjError::Truncation { .. } => "truncation",
        }
    }
}

pub type Result<T> = std::result::Result<T, FgjError>;
