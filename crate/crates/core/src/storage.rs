//! Storage-cost accounting for the cache organizations.
//!
//! Field widths are derived from the geometry: tag bits from the address
//! width, pointer bits from the number of entries they index.

use serde::Serialize;

use crate::cache::CacheGeometry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StorageRow {
    pub name: &'static str,
    pub tag_entry_bits: u64,
    pub data_entry_bits: u64,
    pub tag_entries: u64,
    pub data_entries: u64,
    pub other_bits: u64,
}

impl StorageRow {
    pub fn tag_store_bytes(&self) -> u64 {
        self.tag_entry_bits * self.tag_entries / 8
    }

    pub fn data_store_bytes(&self) -> u64 {
        self.data_entry_bits * self.data_entries / 8
    }

    pub fn total_bytes(&self) -> u64 {
        self.tag_store_bytes() + self.data_store_bytes() + self.other_bits / 8
    }
}

/// Bytes in KiB, rounded to nearest.
pub fn kib(bytes: u64) -> u64 {
    (bytes + 512) / 1024
}

/// Bytes in decimal kB, rounded to nearest.
pub fn kb(bytes: u64) -> u64 {
    (bytes + 500) / 1000
}

fn log2(v: u64) -> u64 {
    debug_assert!(v.is_power_of_two());
    v.trailing_zeros() as u64
}

const ENCODING_BITS: u64 = 4;
const CTR_BITS: u64 = 16;

/// Address tag plus valid and dirty bits of an uncompressed cache.
pub fn baseline_tag_bits(g: &CacheGeometry, address_bits: u64) -> u64 {
    address_bits - log2(g.num_sets() as u64) - log2(g.line_size as u64) + 2
}

fn data_entries(g: &CacheGeometry) -> u64 {
    (g.capacity_bytes / g.line_size) as u64
}

fn line_bits(g: &CacheGeometry) -> u64 {
    g.line_size as u64 * 8
}

pub fn baseline(g: &CacheGeometry, address_bits: u64) -> StorageRow {
    StorageRow {
        name: "baseline",
        tag_entry_bits: baseline_tag_bits(g, address_bits),
        data_entry_bits: line_bits(g),
        tag_entries: data_entries(g),
        data_entries: data_entries(g),
        other_bits: 0,
    }
}

/// Doubled tags with encoding bits and a segment pointer.
pub fn bdi_segmented(g: &CacheGeometry, address_bits: u64) -> StorageRow {
    let segment_ptr = log2(g.budget_segments() as u64);
    StorageRow {
        name: "bdi",
        tag_entry_bits: baseline_tag_bits(g, address_bits) + ENCODING_BITS + segment_ptr,
        tag_entries: data_entries(g) * g.tag_factor as u64,
        ..baseline(g, address_bits)
    }
}

/// [`bdi_segmented`] with an `rrpv_bits`-wide replacement field per tag.
pub fn bdi_rrip(g: &CacheGeometry, address_bits: u64, rrpv_bits: u64) -> StorageRow {
    let row = bdi_segmented(g, address_bits);
    StorageRow {
        name: "bdi_rrip",
        tag_entry_bits: row.tag_entry_bits + rrpv_bits,
        ..row
    }
}

/// [`bdi_rrip`] plus SIP's auxiliary tags (1/8 more) and one counter per bin.
pub fn camp(g: &CacheGeometry, address_bits: u64, rrpv_bits: u64, n_bins: u64) -> StorageRow {
    let row = bdi_rrip(g, address_bits, rrpv_bits);
    StorageRow {
        name: "camp",
        tag_entries: row.tag_entries + row.tag_entries / 8,
        other_bits: n_bins * CTR_BITS,
        ..row
    }
}

/// Forward pointer per tag, one reverse pointer and reuse bits per data entry.
pub fn vway(g: &CacheGeometry, address_bits: u64) -> StorageRow {
    let tag_entries = data_entries(g) * g.tag_factor as u64;
    StorageRow {
        name: "vway",
        tag_entry_bits: baseline_tag_bits(g, address_bits) + log2(data_entries(g)),
        data_entry_bits: line_bits(g) + log2(tag_entries),
        tag_entries,
        data_entries: data_entries(g),
        other_bits: 0,
    }
}

/// V-Way with encoding bits per tag and, per data entry, `rptrs` reverse
/// pointers into one region's tags plus a 3-bit validity/size field each.
pub fn vway_compressed(g: &CacheGeometry, address_bits: u64, rptrs: u64, regions: u64) -> StorageRow {
    let row = vway(g, address_bits);
    let rptr_bits = log2(row.tag_entries / regions);
    StorageRow {
        name: "vway_c",
        tag_entry_bits: row.tag_entry_bits + ENCODING_BITS,
        data_entry_bits: line_bits(g) + rptrs * (rptr_bits + 3),
        ..row
    }
}

/// [`vway_compressed`] plus one dueling counter per region.
pub fn gcamp(g: &CacheGeometry, address_bits: u64, rptrs: u64, regions: u64) -> StorageRow {
    StorageRow {
        name: "gcamp",
        other_bits: regions * CTR_BITS,
        ..vway_compressed(g, address_bits, rptrs, regions)
    }
}
