//! Linearly Compressed Pages.
//!
//! Every line of a compressed page is stored in a slot of the same size `C*`,
//! so the address of line `i` is a multiply and two adds. Lines that do not
//! fit are exceptions, stored uncompressed after a metadata region.
//!
//! ```text
//! | n slots of C* bytes | metadata (M bytes) | n_avail exception slots of C bytes |
//! ```

mod codec;
mod md_cache;
mod memory;
mod page;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{BdiPageCodec, PageCodec, TrimCodec};
pub use md_cache::MdCache;
pub use memory::{LcpMemory, LcpStats, ReadOutcome};
pub use page::{
    batched_fetch, compress_page, LcpMetadata, LcpPage, PageImage, PageLayout, WritebackOutcome,
    TYPE1_PENALTY,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LcpError {
    #[error("invalid LCP geometry: {0}")]
    Config(String),
    #[error("line index {index} out of range for {n} lines")]
    LineIndex { index: usize, n: usize },
    #[error("exception index {index} beyond {available} exception slots")]
    ExceptionIndex { index: usize, available: usize },
    #[error("page of {page} bytes cannot hold {n} slots of {c_star} bytes plus metadata")]
    PageTooSmall { page: usize, n: usize, c_star: usize },
    #[error("unknown c-type {0}")]
    CType(u8),
    #[error("codec: {0}")]
    Codec(String),
    #[error("page image: {0}")]
    Image(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcpGeometry {
    /// Virtual page size `V`.
    pub page_size: usize,
    /// Uncompressed line size `C`.
    pub line_size: usize,
    /// Physical page sizes, ascending; the first is `m_size`.
    pub page_sizes: Vec<usize>,
    /// Store one zero bit per line after the base metadata.
    pub z_bits: bool,
}

impl Default for LcpGeometry {
    fn default() -> Self {
        Self {
            page_size: 4096,
            line_size: 64,
            page_sizes: vec![512, 1024, 2048, 4096],
            z_bits: false,
        }
    }
}

impl LcpGeometry {
    pub fn validate(&self) -> Result<(), LcpError> {
        let bad = |m: String| Err(LcpError::Config(m));
        if self.line_size == 0 || self.page_size % self.line_size != 0 {
            return bad(format!("page size {} not a multiple of line size {}", self.page_size, self.line_size));
        }
        if !self.lines_per_page().is_power_of_two() {
            return bad("lines per page must be a power of two".into());
        }
        if self.page_sizes.is_empty() || self.page_sizes.len() > 4 {
            return bad("between 1 and 4 physical page sizes (2-bit c-size)".into());
        }
        if self.page_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("page sizes must be strictly ascending".into());
        }
        if *self.page_sizes.last().unwrap() != self.page_size {
            return bad("largest physical page size must equal the virtual page size".into());
        }
        Ok(())
    }

    /// `n = V / C`.
    pub fn lines_per_page(&self) -> usize {
        self.page_size / self.line_size
    }

    /// Smallest physical page, the unit of `c_base`.
    pub fn m_size(&self) -> usize {
        self.page_sizes[0]
    }

    pub fn index_bits(&self) -> usize {
        ceil_log2(self.lines_per_page())
    }

    pub fn metadata_bits(&self) -> usize {
        metadata_bits(self.lines_per_page(), self.z_bits)
    }

    /// `M` in bytes.
    pub fn metadata_bytes(&self) -> usize {
        self.metadata_bits().div_ceil(8)
    }

    pub fn c_size_of(&self, physical: usize) -> Option<u8> {
        self.page_sizes.iter().position(|&p| p == physical).map(|i| i as u8)
    }
}

pub(crate) fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// `n(1 + ⌈log2 n⌉) + n` bits, plus `n` z-bits when enabled.
pub fn metadata_bits(n: usize, z_bits: bool) -> usize {
    n * (1 + ceil_log2(n)) + n + if z_bits { n } else { 0 }
}

/// Compression fields added to a page table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PteExtension {
    pub c_bit: bool,
    /// 3 bits; 0 marks an all-zero page.
    pub c_type: u8,
    /// 2 bits; index into the physical page sizes.
    pub c_size: u8,
    /// 3 bits; offset of the page inside its frame, in `m_size` units.
    pub c_base: u8,
    pub p_base: u64,
}

impl PteExtension {
    fn origin(&self, geometry: &LcpGeometry) -> u64 {
        self.p_base + (geometry.m_size() * self.c_base as usize) as u64
    }
}

/// `p_base + m_size × c_base + i × C*` (zero-based `i`).
pub fn line_slot_address(
    pte: &PteExtension,
    i: usize,
    c_star: usize,
    geometry: &LcpGeometry,
) -> Result<u64, LcpError> {
    let n = geometry.lines_per_page();
    if i >= n {
        return Err(LcpError::LineIndex { index: i, n });
    }
    Ok(pte.origin(geometry) + (i * c_star) as u64)
}

/// `⌊(P − (n·C* + M)) / C⌋`, or `None` when the slots and metadata alone
/// overflow `P`.
pub fn n_avail(physical: usize, c_star: usize, geometry: &LcpGeometry) -> Option<usize> {
    let fixed = geometry.lines_per_page() * c_star + geometry.metadata_bytes();
    physical.checked_sub(fixed).map(|rest| rest / geometry.line_size)
}

/// `p_base + m_size × c_base + n·C* + M + e × C`.
pub fn exception_address(
    pte: &PteExtension,
    e_index: usize,
    c_star: usize,
    geometry: &LcpGeometry,
) -> Result<u64, LcpError> {
    let n = geometry.lines_per_page();
    let physical = *geometry
        .page_sizes
        .get(pte.c_size as usize)
        .ok_or_else(|| LcpError::Config(format!("c-size {} out of range", pte.c_size)))?;
    let available = n_avail(physical, c_star, geometry).ok_or(LcpError::PageTooSmall {
        page: physical,
        n,
        c_star,
    })?;
    if e_index >= available {
        return Err(LcpError::ExceptionIndex { index: e_index, available });
    }
    Ok(pte.origin(geometry)
        + (n * c_star + geometry.metadata_bytes() + e_index * geometry.line_size) as u64)
}
