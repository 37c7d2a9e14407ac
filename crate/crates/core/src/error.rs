use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("empty manifest")]
    EmptyManifest,

    #[error("manifest row {line}: {message}")]
    ManifestRow { line: usize, message: String },

    #[error("duplicate record for column {column_index} side {side}")]
    DuplicateRecord { column_index: u32, side: String },

    #[error("no contrast")]
    NoContrast,

    #[error("blank image")]
    BlankImage,

    #[error("insufficient ink")]
    InsufficientInk,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("kind mismatch: expected {expected}, got {actual}")]
    KindMismatch { expected: String, actual: String },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("zero variance")]
    ZeroVariance,

    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error("stage `{stage}` is missing its inputs: {message}")]
    MissingStage { stage: String, message: String },

    #[error("stale input for stage `{stage}`: {path} changed since it was produced")]
    StaleInput { stage: String, path: PathBuf },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Artifact {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::EmptyManifest => "empty-manifest",
            Error::ManifestRow { .. } => "manifest-row",
            Error::DuplicateRecord { .. } => "duplicate-record",
            Error::NoContrast => "no-contrast",
            Error::BlankImage => "blank-image",
            Error::InsufficientInk => "insufficient-ink",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::KindMismatch { .. } => "kind-mismatch",
            Error::TooFewSamples { .. } => "too-few-samples",
            Error::ZeroVariance => "zero-variance",
            Error::Parse { .. } => "parse",
            Error::MissingStage { .. } => "missing-stage",
            Error::StaleInput { .. } => "stale-input",
            Error::Config(_) => "config",
            Error::Artifact { source, .. } => source.kind(),
        }
    }

    /// Attaches the file being produced or consumed when the error occurred.
    pub fn at(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ Error::Artifact { .. } => e,
            e => Error::Artifact {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }

    /// The artifact path attached by [`Error::at`], if any.
    pub fn artifact_path(&self) -> Option<&std::path::Path> {
        match self {
            Error::Artifact { path, .. } => Some(path),
            Error::Io { path, .. } | Error::Image { path, .. } | Error::StaleInput { path, .. } => {
                Some(path)
            }
            _ => None,
        }
    }
}
