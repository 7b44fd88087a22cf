use std::path::PathBuf;

/// Errors surfaced by mask construction, refinement, and bundle I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("mask entry at ({row}, {col}) is {value}, expected 0 or 1")]
    MaskDomain { row: usize, col: usize, value: u8 },

    #[error("row {row}, block {block} holds {ones} ones, pattern allows at most {n} per {m}")]
    PatternViolation {
        row: usize,
        block: usize,
        ones: usize,
        n: u32,
        m: u32,
    },

    #[error("{cols} columns not divisible by block size {m}")]
    BlockMismatch { cols: usize, m: u32 },

    #[error("invalid {what}: {why}")]
    InvalidSpec { what: &'static str, why: String },

    #[error("swap contract violated: {why}")]
    SwapContract { why: String },

    #[error("exhaustive mask search supports at most {max} columns, got {cols}")]
    SizeLimit { cols: usize, max: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: expected {expected} bytes, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: {why}")]
    Format { path: PathBuf, why: String },

    #[error("unknown bundle format version {version}, supported: 1")]
    FormatVersion { version: u64 },

    #[error("bundle layer {layer} has no mask; this stage requires pruned input")]
    MissingMask { layer: String },
}

pub type Result<T> = std::result::Result<T, Error>;
