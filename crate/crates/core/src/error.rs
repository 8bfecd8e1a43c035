use thiserror::Error;

pub type Result<T, E = FsvdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FsvdError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("non-finite {field} at line {line}")]
    NonFiniteValue { line: u64, field: &'static str },
    #[error("dataset has no observations")]
    EmptyDataset,
    #[error("all observation times are equal; cannot rescale to [0,1]")]
    DegenerateTimeRange,
    #[error("time {time} of subject {subject} lies outside [0,1]")]
    TimeOutOfRange { subject: String, time: f64 },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("spline basis needs at least 3 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knots must be strictly increasing and finite (violated at index {0})")]
    NonIncreasingKnots(usize),
    #[error("spline functions live on different bases")]
    BasisMismatch,
    #[error("penalized system is singular even after jitter")]
    SingularSystem,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no grid bin contains an observation")]
    AllMissingColumn,
    #[error("input is identically zero; cannot form a unit vector")]
    AllZeroInput,
    #[error("fitted scale vanished (data orthogonal to the start vector)")]
    DegenerateScale,
    #[error("rank selection needs at least {needed} components, got {got}")]
    TooFewComponents { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("subject index {index} out of range for {n} subjects")]
    SubjectOutOfRange { index: usize, n: usize },
    #[error("model has {have} components, {need} requested")]
    NotEnoughComponents { have: usize, need: usize },
    #[error("rotation matrix is not orthogonal (max deviation {0:e})")]
    NonOrthogonalB(f64),
    #[error("EM log-likelihood became non-finite at iteration {0}")]
    EmDivergence(usize),
    #[error("cluster {0} covariance is singular after ridge")]
    SingularClusterCovariance(usize),
    #[error("regression design is rank deficient (condition number {0:e})")]
    RankDeficientDesign(f64),

    #[error("cluster labels could not be drawn without an empty cluster")]
    EmptyCluster,
    #[error("vector or function has zero norm")]
    ZeroNorm,
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported schema `{found}` (expected `{expected}`)")]
    UnsupportedSchema { found: String, expected: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FsvdError {
    /// Input/configuration problems, as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            FsvdError::MalformedRow { .. }
                | FsvdError::NonFiniteValue { .. }
                | FsvdError::EmptyDataset
                | FsvdError::DegenerateTimeRange
                | FsvdError::TimeOutOfRange { .. }
                | FsvdError::InvalidDataset(_)
                | FsvdError::InvalidConfig(_)
                | FsvdError::NonOrthogonalB(_)
                | FsvdError::UnsupportedSchema { .. }
                | FsvdError::Io(_)
                | FsvdError::Json(_)
                | FsvdError::Csv(_)
        )
    }
}
