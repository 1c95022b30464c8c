use thiserror::Error;

use crate::sketch::{SketchConfig, Variant};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("`{name}` = {value} is outside the open unit interval")]
    Domain { name: &'static str, value: f64 },

    /// A full-replication sketch that has not seen any item has registers at
    /// negative infinity and no meaningful estimate.
    #[error("sketch is empty: no item has been inserted")]
    EmptySketch,

    #[error("incompatible sketch configurations: {left} vs {right}")]
    IncompatibleConfig {
        left: SketchConfig,
        right: SketchConfig,
    },

    #[error("operation expects a {expected} sketch, found {found}")]
    VariantMismatch { expected: Variant, found: Variant },

    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Failures while decoding a serialized sketch.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic bytes {0:02x?}, expected \"GMBL\"")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("invalid register {index}: {reason}")]
    InvalidRegister { index: usize, reason: String },
}
