use thiserror::Error;

/// Errors surfaced by the evidence library.
#[derive(Debug, Error)]
pub enum EvidenceError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("evaluation outside support")]
    OutsideSupport,

    #[error("log-density is not concave at the located mode")]
    NonConcaveMode,

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("variational optimisation failed: {0}")]
    VariationalFailure(String),

    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    #[error("sampler initialization failed: {0}")]
    InitializationFailed(String),

    #[error("unsupported prior configuration: {0}")]
    UnsupportedPrior(String),

    #[error("evidence estimation failed: {0}")]
    EvidenceFailure(String),

    #[error("invalid model pairing: {0}")]
    InvalidPairing(String),

    #[error("unknown model: {0}")]
    UnknownModel(String),

    #[error("missing trace data: {0}")]
    MissingTrace(String),

    #[error("comparison refused: {0}")]
    ComparisonRefused(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("fetch error: {0}")]
    Fetch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvidenceError>;

impl EvidenceError {
    /// Exit-code bucket used by the CLI: 3 usage, 4 data, 5 numerical.
    pub fn exit_code(&self) -> i32 {
        use EvidenceError::*;
        match self {
            InvalidArgument(_) | DimensionMismatch { .. } | UnknownModel(_)
            | InvalidPairing(_) | MissingTrace(_) => 3,
            Data(_) | Fetch(_) | Io(_) | Serde(_) | ComparisonRefused(_) => 4,
            _ => 5,
        }
    }
}
