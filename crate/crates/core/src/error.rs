use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("feature row count {rows} does not match vertex count {vertices}")]
    FeatureRowMismatch { rows: usize, vertices: usize },

    #[error("non-finite feature value at row {row}, channel {channel}")]
    NonFiniteFeature { row: usize, channel: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("subdivision level {0} exceeds the maximum of 8")]
    LevelTooLarge(u32),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("mesh has no features attached")]
    MissingFeatures,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate manifest entry for subject {subject_id} ({space})")]
    DuplicateSubject { subject_id: String, space: String },

    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset split {0} is empty")]
    EmptySplit(&'static str),

    #[error("{} prediction rows have no manifest record: {}", .0.len(), .0.join(", "))]
    UnmatchedPredictions(Vec<String>),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
