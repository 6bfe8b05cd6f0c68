use thiserror::Error;

/// Errors raised across the scoring, testing and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no qualifying cases: the restricted evaluation set is empty")]
    NoQualifyingCases,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{count} non-finite score(s) in series `{series}`; drop or handle them before testing")]
    NonFiniteScores { series: String, count: usize },

    #[error("variance estimate is not positive ({0:e})")]
    NonPositiveVariance(f64),

    #[error("zero variance with nonzero mean score difference ({mean_diff:e})")]
    ZeroVarianceNonzeroMean { mean_diff: f64 },

    #[error("rank-deficient regressor matrix")]
    RankDeficient,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("the quadratic approximation yields an improper score for `{0}`")]
    ImproperApproximation(String),

    #[error("parse error at row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Shorthand for [`Error::InvalidParameter`].
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
