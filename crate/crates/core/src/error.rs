use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Design-space document or rule failed to parse or validate.
    #[error("design space: {0}")]
    Space(String),

    #[error("configuration has {got} indices, space has {expected} knobs")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for knob `{knob}` (cardinality {cardinality})")]
    IndexOutOfRange {
        knob: String,
        index: usize,
        cardinality: usize,
    },

    #[error("ordinal {id} out of range for space of size {size}")]
    OrdinalOutOfRange { id: u64, size: u64 },

    #[error("feature dimension {got} does not match model dimension {expected}")]
    FeatureDimension { expected: usize, got: usize },

    #[error("cannot fit a cost model on an empty training set")]
    EmptyTrainingSet,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("clustering: {0}")]
    Clustering(String),

    #[error("every valid configuration has already been visited")]
    SpaceExhausted,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("backend protocol violation: {0}")]
    Protocol(String),

    #[error("backend: {0}")]
    Backend(String),

    #[error("no valid configuration measured within budget")]
    NoValidResult,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
