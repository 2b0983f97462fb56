//! Golden-vector text files for cross-implementation codec checks.
//!
//! One vector per line: `<128 hex chars> <encoding-name> <size-bytes>`.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{CacheLineData, CompressionError, Encoding};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenVector {
    pub line: CacheLineData,
    pub encoding: Encoding,
    pub size_bytes: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("golden vector line {line_no}: {message}")]
pub struct GoldenParseError {
    pub line_no: usize,
    pub message: String,
}

pub fn parse_golden(text: &str) -> Result<Vec<GoldenVector>, GoldenParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| GoldenParseError { line_no, message };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let [hex_line, name, size] = fields.as_slice() else {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        };
        if hex_line.len() != 128 {
            return Err(err(format!("line payload must be 128 hex chars, got {}", hex_line.len())));
        }
        let bytes = hex::decode(hex_line).map_err(|e| err(e.to_string()))?;
        let line = CacheLineData::new(bytes).map_err(|e| err(e.to_string()))?;
        let encoding: Encoding = name
            .parse()
            .map_err(|e: CompressionError| err(e.to_string()))?;
        let size_bytes = size
            .parse()
            .map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
        out.push(GoldenVector {
            line,
            encoding,
            size_bytes,
        });
    }
    Ok(out)
}

pub fn format_golden(vectors: &[GoldenVector]) -> String {
    let mut out = String::new();
    for v in vectors {
        let _ = writeln!(
            out,
            "{} {} {}",
            hex::encode(v.line.as_bytes()),
            v.encoding,
            v.size_bytes
        );
    }
    out
}
