use std::path::PathBuf;

use thiserror::Error;

use crate::dsl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid bounding box: {0}")]
    InvalidBoundingBox(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("domain error in `{expr}`: {message}")]
    Domain { expr: String, message: String },

    #[error("invalid polygon data: {0}")]
    Polygon(String),

    #[error("all particle weights are zero: the constraints are violated everywhere in the cloud")]
    TotalConstraintViolation,

    #[error(
        "constraint schedule did not reach the target after {steps} steps (last tau = {last_tau})"
    )]
    ScheduleExhausted { steps: usize, last_tau: f64 },

    #[error("design size {requested} exceeds the {available} available candidates")]
    DesignTooLarge { requested: usize, available: usize },

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("at least {needed} points are required, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("projection enumeration supports at most {max} dimensions, got {got}")]
    TooManyDimensions { max: usize, got: usize },

    #[error("neighbour graph with k = {k} has {components} connected components; increase k")]
    DisconnectedGraph { k: usize, components: usize },

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
