use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vector has zero norm")]
    ZeroNormVector,

    #[error("empty input")]
    EmptyInput,

    #[error("vector contains a non-finite entry")]
    NonFinite,

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate covariance: all points are identical")]
    DegenerateCovariance,

    #[error("{path}: line {line}: malformed JSON: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: line {line}: schema violation in field `{field}`: {message}")]
    SchemaViolation {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    #[error("{path}: line {line}: duplicate id `{id}`")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("embedding provider unavailable after {attempts} attempts: {message}")]
    ProviderUnavailable { attempts: usize, message: String },

    #[error("embedding provider rejected credentials: {0}")]
    AuthError(String),

    #[error("provider returned dimension {actual}, expected {expected}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("no fixture embedding for id `{0}`")]
    MissingFixture(String),

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("no cluster contains speaker data")]
    NoSpeakerData,

    #[error("no valid triplets: {0}")]
    NoValidTriplets(String),

    #[error("too few pairs to split: need at least {needed}, got {got}")]
    TooFewPairs { needed: usize, got: usize },

    #[error("margin must be positive, got {0}")]
    InvalidMargin(f64),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergedLoss { epoch: usize },

    #[error("training labels contain a single class")]
    SingleClassInput,

    #[error("impurity of an empty node is undefined")]
    EmptyNode,

    #[error("model has not been fitted")]
    UnfittedModel,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("no candidates to rank")]
    EmptyCandidates,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
