use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {left:?} vs {right:?}")]
    Shape { context: &'static str, left: Vec<usize>, right: Vec<usize> },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("sample `{stem}` has no {modality} file")]
    MissingPair { stem: String, modality: &'static str },

    #[error("dataset {0}")]
    Dataset(String),

    #[error("cannot read image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt checkpoint field `{field}`: {reason}")]
    CorruptCheckpoint { field: String, reason: String },

    #[error("checkpoint fingerprint {found} does not match model fingerprint {expected}")]
    Fingerprint { expected: String, found: String },

    #[error("expected a `{expected}` checkpoint, found `{found}`")]
    StageMismatch { expected: String, found: String },

    #[error("a `{stage}` checkpoint is required")]
    MissingCheckpoint { stage: String },

    #[error("checkpoint is incompatible with the model: {0}")]
    Incompatible(String),

    #[error("no checkpoint parameter matched the target model ({0})")]
    NoMatchingParameters(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn shape(context: &'static str, left: impl Into<Vec<usize>>, right: impl Into<Vec<usize>>) -> Self {
        Error::Shape { context, left: left.into(), right: right.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable machine-readable category used as the CLI error prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::MissingPair { .. } => "missing-pair",
            Error::Dataset(_) => "dataset",
            Error::Image { .. } => "image",
            Error::Io { .. } => "io",
            Error::CorruptCheckpoint { .. } => "corrupt-checkpoint",
            Error::Fingerprint { .. } => "fingerprint",
            Error::StageMismatch { .. } => "stage",
            Error::MissingCheckpoint { .. } => "missing-checkpoint",
            Error::Incompatible(_) => "incompatible",
            Error::NoMatchingParameters(_) => "no-match",
            Error::Config(_) => "config",
        }
    }
}
