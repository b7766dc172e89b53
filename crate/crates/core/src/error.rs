use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("jerk series is empty: {0}")]
    EmptySeries(String),
    #[error("contrast undefined: phase {phase} has no jerk samples")]
    UndefinedContrast { phase: usize },
    #[error("summary undefined: {0}")]
    UndefinedSummary(String),
    #[error("timestep {t} is not a chunk boundary (stride {stride}, phase offset {offset})")]
    NotABoundary {
        t: usize,
        stride: usize,
        offset: usize,
    },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("capability missing: {0}")]
    Capability(String),
    #[error("not enough contexts: requested {requested}, {available} available")]
    NotEnoughContexts { requested: usize, available: usize },
    #[error("probe invalid: {0}")]
    ProbeInvalid(String),
    #[error("direction search failed: {0}")]
    SearchFailed(String),
    #[error("mismatched arms: {0}")]
    MismatchedArms(String),
    #[error("trace parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
