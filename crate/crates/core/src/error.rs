// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad geometry or hyperparameters (stride larger than the image, sigma <= 0, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Caller handed in mismatched shapes or lengths.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Well-formed input whose content cannot be evaluated (missing metadata, zero area, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Map-file decoding failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected \"CLM1\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported map file version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated map file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("map file has {extra} trailing bytes after the declared payload")]
    TrailingBytes { extra: usize },

    #[error("invalid header: {0}")]
    InvalidHeader(String),
}

/// Annotation and prediction file ingestion failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("malformed JSON: {0}")]
    Json(String),

    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("annotation {annotation_id}: missing keypoints array")]
    MissingKeypoints { annotation_id: u64 },

    #[error("annotation {annotation_id}: expected {expected} keypoints, found {found}")]
    KeypointCount {
        annotation_id: u64,
        expected: usize,
        found: usize,
    },

    #[error("annotation {annotation_id}: {message}")]
    Annotation { annotation_id: u64, message: String },
}

impl IngestError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        IngestError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
