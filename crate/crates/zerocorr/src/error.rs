use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("covariance matrix is not positive definite (pivot {pivot}{})", fmt_t(*.t))]
    NotPositiveDefinite { pivot: usize, t: Option<f64> },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("need at least {needed} points in range, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("non-positive value {value} at t = {t}")]
    NonPositive { t: f64, value: f64 },

    #[error("term budget exceeded: {0}")]
    TermBudget(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("truncation insufficient: {0}")]
    Truncation(String),
}

fn fmt_t(t: Option<f64>) -> String {
    match t {
        Some(t) => format!(", t = {t}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a separation to a positive-definiteness failure.
    pub fn at_t(self, t: f64) -> Self {
        match self {
            Error::NotPositiveDefinite { pivot, .. } => Error::NotPositiveDefinite { pivot, t: Some(t) },
            other => other,
        }
    }
}
