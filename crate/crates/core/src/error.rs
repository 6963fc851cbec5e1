use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("failed to decode raster {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("unsupported raster format in {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("dimension mismatch: {context} ({expected_h}x{expected_w} vs {found_h}x{found_w})")]
    DimensionMismatch {
        context: String,
        expected_h: usize,
        expected_w: usize,
        found_h: usize,
        found_w: usize,
    },

    #[error("invalid raster values in {context}: {detail}")]
    InvalidValues { context: String, detail: String },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model file is truncated: {0}")]
    Truncated(String),

    #[error("model file checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error("training data must contain both classes: {0}")]
    SingleClass(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },

    #[error("features outside the unit interval: {0}")]
    Unscaled(String),

    #[error("QUBO with {0} variables is too large for exhaustive search (limit 24)")]
    TooLarge(usize),

    #[error("not enough samples: {0}")]
    NotEnoughSamples(String),

    #[error("model/scene mismatch: {0}")]
    ModelMismatch(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
