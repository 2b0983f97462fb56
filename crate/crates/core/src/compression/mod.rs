//! BΔI cache line compression.
//!
//! A line is viewed as an array of `k`-byte little-endian elements and encoded
//! as one arbitrary base, an implicit zero base and fixed-width deltas. The
//! compressor evaluates every encoding and keeps the smallest.

mod bdi;
mod encoding;
pub mod golden;

use thiserror::Error;

pub use bdi::{
    compress_line, compress_unit, decompress_line, size_bucket, CacheLineData, CompressedBlock,
    SizeBucket,
};
pub(crate) use bdi::bucket_unchecked;
pub use encoding::Encoding;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompressionError {
    #[error("unsupported line size {0} (expected 32 or 64)")]
    LineSize(usize),
    #[error("invalid compressor unit: {base}-byte base with {delta}-byte delta")]
    InvalidUnit { base: usize, delta: usize },
    #[error("malformed compressed block: {0}")]
    Malformed(String),
    #[error("size {size} exceeds line size {line_size}")]
    SizeOutOfRange { size: usize, line_size: usize },
    #[error("unknown encoding name {0:?}")]
    UnknownEncoding(String),
}

/// Per-line compression as seen by the cache models.
pub trait Codec: Send + Sync {
    fn name(&self) -> &'static str;

    /// Encoding and compressed size of `line`.
    fn classify(&self, line: &CacheLineData) -> (Encoding, usize);
}

/// BΔI codec.
#[derive(Debug, Default, Clone, Copy)]
pub struct Bdi;

impl Codec for Bdi {
    fn name(&self) -> &'static str {
        "bdi"
    }

    fn classify(&self, line: &CacheLineData) -> (Encoding, usize) {
        let block = compress_line(line);
        (block.encoding, block.size_bytes())
    }
}

/// Leaves every line uncompressed.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCompression;

impl Codec for NoCompression {
    fn name(&self) -> &'static str {
        "none"
    }

    fn classify(&self, line: &CacheLineData) -> (Encoding, usize) {
        (Encoding::NoCompr, line.line_size())
    }
}
