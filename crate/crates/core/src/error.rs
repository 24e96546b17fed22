//! Crate-wide error type.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in `concept-bridge`.
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// A matrix or vector that must hold data was empty.
    #[error("{what} must not be empty")]
    Empty {
        /// What was empty.
        what: &'static str,
    },

    /// A NaN or infinity where only finite values are allowed.
    #[error("non-finite value in {context} at {location}")]
    NonFinite {
        /// Which tensor or input.
        context: String,
        /// Human-readable position (row/col or flat index).
        location: String,
    },

    /// Operand shapes are incompatible.
    #[error("shape mismatch in {op}: {detail}")]
    Shape {
        /// Operation name.
        op: &'static str,
        /// What was expected vs found.
        detail: String,
    },

    /// An argument is outside its valid domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two feature matrices were not computed over the same dataset.
    #[error("feature matrices must be aligned on the same dataset: source has {src} rows, target has {tgt}")]
    Misaligned {
        /// Source row count.
        src: usize,
        /// Target row count.
        tgt: usize,
    },

    /// The cumulative-activation weights cannot be used as a weighting.
    #[error("degenerate wMPPC weights: {0}")]
    DegenerateWeights(String),

    /// A grid cell failed; carries the layer coordinates.
    #[error("grid cell (source layer {src_layer}, target layer {tgt_layer}): {source}")]
    GridCell {
        /// Source layer id.
        src_layer: u32,
        /// Target layer id.
        tgt_layer: u32,
        /// Underlying failure.
        #[source]
        source: Box<Error>,
    },

    /// Integer overflow in an exact count.
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    /// Underlying I/O failure.
    #[error("I/O error on {path}: {source}")]
    Io {
        /// File being accessed.
        path: PathBuf,
        /// OS error.
        #[source]
        source: std::io::Error,
    },

    /// The file does not start with the expected magic bytes.
    #[error("{path}: bad magic at offset 0: expected {expected:?}, found {found:?}")]
    BadMagic {
        /// File being read.
        path: PathBuf,
        /// Expected magic.
        expected: String,
        /// Bytes found.
        found: String,
    },

    /// The file format version is not one this build understands.
    #[error("{path}: unsupported format version {found} at offset 4 (supported: {supported})")]
    UnsupportedVersion {
        /// File being read.
        path: PathBuf,
        /// Version found in the file.
        found: u32,
        /// Version this build reads.
        supported: u32,
    },

    /// The file is shorter (or longer) than its header promises.
    #[error("{path}: size mismatch at offset {offset}: expected {expected} bytes, found {actual}")]
    Truncated {
        /// File being read.
        path: PathBuf,
        /// Offset where the problem was detected.
        offset: u64,
        /// Expected byte count.
        expected: u64,
        /// Actual byte count.
        actual: u64,
    },

    /// Structurally invalid file content.
    #[error("{path}: malformed content at offset {offset}: {message}")]
    Malformed {
        /// File being read.
        path: PathBuf,
        /// Offset of the offending field.
        offset: u64,
        /// What is wrong.
        message: String,
    },

    /// JSON (de)serialization failure outside of file parsing.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// CSV emission failure.
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
