use std::path::PathBuf;

use thiserror::Error;

/// Coarse failure category. The CLI maps each category onto an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Model,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid manifest entry {row}: {reason}")]
    Manifest { row: usize, reason: String },

    #[error("unresolvable reference `{0}`")]
    Unresolvable(String),

    #[error("missing morph metadata on row {0}")]
    MissingMorphMeta(usize),

    #[error("alpha out of range on row {row}: {alpha}")]
    AlphaOutOfRange { row: usize, alpha: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector in cosine similarity")]
    ZeroNorm,

    #[error("no face found in `{0}`")]
    NoFace(String),

    #[error("cannot decode image `{path}`: {reason}")]
    Decode { path: String, reason: String },

    #[error("modality mismatch: {0}")]
    Modality(String),

    #[error("provider `{provider}` failed: {reason}")]
    Provider { provider: String, reason: String },

    #[error("training data error: {0}")]
    TrainingData(String),

    #[error("training diverged: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty score list")]
    EmptyScores,

    #[error("model error: {0}")]
    Model(String),

    #[error("bundle version {found} is not supported (expected {expected})")]
    BundleVersion { found: u32, expected: u32 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),

    /// A failure inside one pipeline stage, tagged with that stage's name.
    #[error("{module}: {source}")]
    InModule {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attributes the error to a pipeline stage.
    pub fn in_module(self, module: &'static str) -> Self {
        Error::InModule {
            module,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InModule { source, .. } => source.kind(),
            Error::Config(_) => ErrorKind::Config,
            Error::TrainingData(_)
            | Error::NonFinite(_)
            | Error::Model(_)
            | Error::BundleVersion { .. } => ErrorKind::Model,
            _ => ErrorKind::Data,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
