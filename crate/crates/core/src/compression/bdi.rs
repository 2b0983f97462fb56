use serde::{Deserialize, Serialize};

use super::{CompressionError, Encoding};

/// Raw, uncompressed cache line payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheLineData {
    bytes: Vec<u8>,
}

impl CacheLineData {
    pub const SUPPORTED_SIZES: [usize; 2] = [32, 64];

    pub fn new(bytes: Vec<u8>) -> Result<Self, CompressionError> {
        if !Self::SUPPORTED_SIZES.contains(&bytes.len()) {
            return Err(CompressionError::LineSize(bytes.len()));
        }
        Ok(Self { bytes })
    }

    pub fn zeroed(line_size: usize) -> Result<Self, CompressionError> {
        Self::new(vec![0; line_size])
    }

    /// Builds a line from little-endian 8-byte words.
    pub fn from_u64s(words: &[u64]) -> Result<Self, CompressionError> {
        Self::new(words.iter().flat_map(|w| w.to_le_bytes()).collect())
    }

    /// Builds a line from little-endian 4-byte words.
    pub fn from_u32s(words: &[u32]) -> Result<Self, CompressionError> {
        Self::new(words.iter().flat_map(|w| w.to_le_bytes()).collect())
    }

    /// Builds a line from little-endian 2-byte words.
    pub fn from_u16s(words: &[u16]) -> Result<Self, CompressionError> {
        Self::new(words.iter().flat_map(|w| w.to_le_bytes()).collect())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn line_size(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_zero(&self) -> bool {
        self.bytes.iter().all(|&b| b == 0)
    }

    /// Element `i` when the line is viewed as `width`-byte little-endian values.
    pub fn element(&self, i: usize, width: usize) -> u64 {
        read_le(&self.bytes[i * width..(i + 1) * width])
    }

    pub fn elements(&self, width: usize) -> impl Iterator<Item = u64> + '_ {
        self.bytes.chunks_exact(width).map(read_le)
    }
}

fn read_le(chunk: &[u8]) -> u64 {
    let mut buf = [0u8; 8];
    buf[..chunk.len()].copy_from_slice(chunk);
    u64::from_le_bytes(buf)
}

fn width_mask(bytes: usize) -> u64 {
    if bytes >= 8 {
        u64::MAX
    } else {
        (1u64 << (8 * bytes)) - 1
    }
}

/// Sign-extends the low `bytes` bytes of `v`.
fn sign_extend(v: u64, bytes: usize) -> i64 {
    let shift = 64 - 8 * bytes as u32;
    ((v << shift) as i64) >> shift
}

fn fits_signed(v: i64, bytes: usize) -> bool {
    if bytes >= 8 {
        return true;
    }
    let half = 1i64 << (8 * bytes - 1);
    (-half..half).contains(&v)
}

/// Difference `value - base` in `k`-byte modular arithmetic, as a signed value.
fn delta(value: u64, base: u64, k: usize) -> i64 {
    sign_extend(value.wrapping_sub(base) & width_mask(k), k)
}

/// A compressed cache line.
///
/// For base+delta encodings, element `i` decompresses to
/// `(zero_base_mask[i] ? 0 : base) + deltas[i]` modulo `2^(8k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedBlock {
    pub encoding: Encoding,
    pub line_size: usize,
    /// Arbitrary base (k bytes). For RepValues, the repeated 8-byte value.
    pub base: u64,
    /// Bit `i` set means element `i` is relative to the implicit zero base.
    pub zero_base_mask: u64,
    pub deltas: Vec<i64>,
    /// Stored bytes for NoCompr; empty otherwise.
    pub raw: Vec<u8>,
}

impl CompressedBlock {
    pub fn size_bytes(&self) -> usize {
        self.encoding.compressed_size(self.line_size)
    }

    fn uncompressed(line: &CacheLineData) -> Self {
        CompressedBlock {
            encoding: Encoding::NoCompr,
            line_size: line.line_size(),
            base: 0,
            zero_base_mask: 0,
            deltas: Vec::new(),
            raw: line.as_bytes().to_vec(),
        }
    }

    /// Number of elements for base+delta encodings.
    pub fn element_count(&self) -> usize {
        self.encoding
            .base_width()
            .map(|k| self.line_size / k)
            .unwrap_or(0)
    }
}

fn validate_unit(line_size: usize, k: usize, d: usize) -> Result<(), CompressionError> {
    let ok = matches!(k, 2 | 4 | 8) && matches!(d, 1 | 2 | 4) && d < k && line_size % k == 0;
    if ok {
        Ok(())
    } else {
        Err(CompressionError::InvalidUnit { base: k, delta: d })
    }
}

/// One compressor unit: tries to encode `line` with `k`-byte elements and
/// `d`-byte deltas.
///
/// With `implicit_zero_first_pass`, elements that already fit in `d` bytes are
/// encoded against the zero base and the first remaining element becomes the
/// arbitrary base. Without it this is plain B+Δ with the first element as base.
/// Returns `Ok(None)` when the line does not fit this unit.
pub fn compress_unit(
    line: &CacheLineData,
    k: usize,
    d: usize,
    implicit_zero_first_pass: bool,
) -> Result<Option<CompressedBlock>, CompressionError> {
    validate_unit(line.line_size(), k, d)?;
    let encoding = Encoding::for_unit(k, d).expect("validated unit has an encoding");
    let n = line.line_size() / k;

    let mut zero_base_mask = 0u64;
    if implicit_zero_first_pass {
        for (i, v) in line.elements(k).enumerate() {
            if fits_signed(sign_extend(v, k), d) {
                zero_base_mask |= 1 << i;
            }
        }
    }

    let base = line
        .elements(k)
        .enumerate()
        .find(|(i, _)| zero_base_mask & (1 << i) == 0)
        .map(|(_, v)| v)
        .unwrap_or(0);

    let mut deltas = Vec::with_capacity(n);
    for (i, v) in line.elements(k).enumerate() {
        let from = if zero_base_mask & (1 << i) != 0 { 0 } else { base };
        let dv = delta(v, from, k);
        if !fits_signed(dv, d) {
            return Ok(None);
        }
        deltas.push(dv);
    }

    Ok(Some(CompressedBlock {
        encoding,
        line_size: line.line_size(),
        base,
        zero_base_mask,
        deltas,
        raw: Vec::new(),
    }))
}

/// Compresses a line with the encoding of smallest size among all applicable
/// ones. Ties go to the earlier encoding in table order; NoCompr always applies.
pub fn compress_line(line: &CacheLineData) -> CompressedBlock {
    let line_size = line.line_size();
    if line.is_zero() {
        return CompressedBlock {
            encoding: Encoding::Zeros,
            line_size,
            base: 0,
            zero_base_mask: 0,
            deltas: Vec::new(),
            raw: Vec::new(),
        };
    }

    // A 1-, 2- or 4-byte repeat is also an 8-byte repeat, so one check covers
    // every repeat granularity.
    let first = line.element(0, 8);
    if line.elements(8).all(|v| v == first) {
        return CompressedBlock {
            encoding: Encoding::RepValues,
            line_size,
            base: first,
            zero_base_mask: 0,
            deltas: Vec::new(),
            raw: Vec::new(),
        };
    }

    let mut best: Option<CompressedBlock> = None;
    for enc in Encoding::BASE_DELTA {
        let (k, d) = (enc.base_width().unwrap(), enc.delta_width().unwrap());
        let candidate = compress_unit(line, k, d, true).expect("table units are valid");
        if let Some(block) = candidate {
            let better = best
                .as_ref()
                .map_or(true, |b| block.size_bytes() < b.size_bytes());
            if better {
                best = Some(block);
            }
        }
    }
    best.filter(|b| b.size_bytes() < line_size)
        .unwrap_or_else(|| CompressedBlock::uncompressed(line))
}

/// Reconstructs the original line from a compressed block.
pub fn decompress_line(block: &CompressedBlock) -> Result<CacheLineData, CompressionError> {
    let line_size = block.line_size;
    if !CacheLineData::SUPPORTED_SIZES.contains(&line_size) {
        return Err(CompressionError::LineSize(line_size));
    }
    let bytes = match block.encoding {
        Encoding::Zeros => vec![0; line_size],
        Encoding::RepValues => block
            .base
            .to_le_bytes()
            .iter()
            .copied()
            .cycle()
            .take(line_size)
            .collect(),
        Encoding::NoCompr => {
            if block.raw.len() != line_size {
                return Err(CompressionError::Malformed(format!(
                    "uncompressed payload is {} bytes, expected {line_size}",
                    block.raw.len()
                )));
            }
            block.raw.clone()
        }
        enc => {
            let k = enc.base_width().unwrap();
            let d = enc.delta_width().unwrap();
            let n = line_size / k;
            if block.deltas.len() != n {
                return Err(CompressionError::Malformed(format!(
                    "{enc} block has {} deltas, expected {n}",
                    block.deltas.len()
                )));
            }
            if block.base & !width_mask(k) != 0 {
                return Err(CompressionError::Malformed(format!(
                    "base {:#x} exceeds {k} bytes",
                    block.base
                )));
            }
            if n < 64 && block.zero_base_mask >> n != 0 {
                return Err(CompressionError::Malformed(format!(
                    "zero-base mask {:#x} wider than {n} elements",
                    block.zero_base_mask
                )));
            }
            let mut out = Vec::with_capacity(line_size);
            for (i, &dv) in block.deltas.iter().enumerate() {
                if !fits_signed(dv, d) {
                    return Err(CompressionError::Malformed(format!(
                        "delta {dv} at element {i} exceeds {d} bytes"
                    )));
                }
                let from = if block.zero_base_mask & (1 << i) != 0 {
                    0
                } else {
                    block.base
                };
                let v = from.wrapping_add(dv as u64) & width_mask(k);
                out.extend_from_slice(&v.to_le_bytes()[..k]);
            }
            out
        }
    };
    CacheLineData::new(bytes)
}

/// Power-of-two size bucket used as the denominator of a block's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SizeBucket(u32);

impl SizeBucket {
    pub fn get(self) -> u32 {
        self.0
    }

    pub fn log2(self) -> u32 {
        self.0.trailing_zeros()
    }
}

/// 0–7B → 2, 8–15B → 4, 16–31B → 8, 32–63B → 16, 64B → 32.
pub fn size_bucket(size_bytes: usize, line_size: usize) -> Result<SizeBucket, CompressionError> {
    if size_bytes > line_size {
        return Err(CompressionError::SizeOutOfRange {
            size: size_bytes,
            line_size,
        });
    }
    Ok(SizeBucket(bucket_unchecked(size_bytes)))
}

pub(crate) fn bucket_unchecked(size_bytes: usize) -> u32 {
    if size_bytes < 8 {
        return 2;
    }
    let log = usize::BITS - 1 - size_bytes.leading_zeros();
    1 << (log - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line64(words: [u64; 8]) -> CacheLineData {
        CacheLineData::from_u64s(&words).unwrap()
    }

    #[test]
    fn rejects_odd_line_sizes() {
        assert!(CacheLineData::new(vec![0; 48]).is_err());
        assert!(CacheLineData::new(vec![0; 32]).is_ok());
    }

    #[test]
    fn h264ref_style_line_is_b4d1() {
        // eight small 4-byte values, first value 0 (deltas are signed bytes)
        let line = CacheLineData::from_u32s(&[0, 11, 25, 3, 100, 7, 127, 90]).unwrap();
        let block = compress_unit(&line, 4, 1, false).unwrap().unwrap();
        assert_eq!(block.encoding, Encoding::Base4Delta1);
        assert_eq!(block.size_bytes(), 12);
        assert_eq!(compress_line(&line).size_bytes(), 12);
    }

    #[test]
    fn identical_words_fit_b8d1_but_rep_values_wins() {
        let v = 0xDEAD_BEEF_00C0_FFEE;
        let line = line64([v; 8]);
        let unit = compress_unit(&line, 8, 1, true).unwrap().unwrap();
        assert_eq!(unit.base, v);
        assert!(unit.deltas.iter().all(|&d| d == 0));
        assert_eq!(unit.size_bytes(), 16);
        let best = compress_line(&line);
        assert_eq!(best.encoding, Encoding::RepValues);
        assert_eq!(best.size_bytes(), 8);
    }

    #[test]
    fn pointers_mixed_with_small_ints_need_two_bases() {
        let line = line64([
            0x09A4_0178,
            0x0B,
            0x01,
            0x09A4_01D8,
            0x0A,
            0x0B,
            0x09A4_0160,
            0x09A4_0178,
        ]);
        assert!(compress_unit(&line, 8, 2, false).unwrap().is_none());
        let two_base = compress_unit(&line, 8, 2, true).unwrap().unwrap();
        assert_eq!(two_base.base, 0x09A4_0178);
        assert_eq!(two_base.zero_base_mask, 0b0011_0110);
        assert_eq!(decompress_line(&two_base).unwrap(), line);
    }

    #[test]
    fn invalid_units_are_config_errors() {
        let line = CacheLineData::zeroed(64).unwrap();
        for (k, d) in [(8, 8), (4, 4), (2, 2), (3, 1), (8, 3), (16, 1), (2, 0)] {
            assert!(matches!(
                compress_unit(&line, k, d, true),
                Err(CompressionError::InvalidUnit { .. })
            ));
        }
    }

    #[test]
    fn table_examples() {
        let zeros = CacheLineData::zeroed(64).unwrap();
        let z = compress_line(&zeros);
        assert_eq!((z.encoding, z.size_bytes()), (Encoding::Zeros, 1));

        let rep = line64([0xDEAD_BEEF_00C0_FFEE; 8]);
        let r = compress_line(&rep);
        assert_eq!((r.encoding, r.size_bytes()), (Encoding::RepValues, 8));

        let seq = line64(std::array::from_fn(|i| 0x1000 + i as u64));
        let s = compress_line(&seq);
        assert_eq!((s.encoding, s.size_bytes()), (Encoding::Base8Delta1, 16));
    }

    #[test]
    fn decompress_b8d1_by_addition() {
        let block = CompressedBlock {
            encoding: Encoding::Base8Delta1,
            line_size: 64,
            base: 0x1000,
            zero_base_mask: 0,
            deltas: (0..8).collect(),
            raw: Vec::new(),
        };
        let line = decompress_line(&block).unwrap();
        let expected: Vec<u64> = (0..8).map(|i| 0x1000 + i).collect();
        assert_eq!(line.elements(8).collect::<Vec<_>>(), expected);
    }

    #[test]
    fn decompress_rejects_wide_delta() {
        let block = CompressedBlock {
            encoding: Encoding::Base8Delta1,
            line_size: 64,
            base: 0x1000,
            zero_base_mask: 0,
            deltas: vec![0, 0, 0, 300, 0, 0, 0, 0],
            raw: Vec::new(),
        };
        assert!(matches!(
            decompress_line(&block),
            Err(CompressionError::Malformed(_))
        ));
    }

    #[test]
    fn negative_deltas_wrap_in_element_width() {
        let line = CacheLineData::from_u16s(&[
            0x0000, 0xFFFF, 0x0100, 0x00FF, 0xFF80, 0x007F, 0x0105, 0x00F0, 0x0000, 0xFFFF,
            0x0100, 0x00FF, 0xFF80, 0x007F, 0x0105, 0x00F0, 0x0000, 0xFFFF, 0x0100, 0x00FF,
            0xFF80, 0x007F, 0x0105, 0x00F0, 0x0000, 0xFFFF, 0x0100, 0x00FF, 0xFF80, 0x007F,
            0x0105, 0x00F0,
        ])
        .unwrap();
        let block = compress_line(&line);
        assert_eq!(decompress_line(&block).unwrap(), line);
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(size_bucket(1, 64).unwrap().get(), 2);
        assert_eq!(size_bucket(20, 64).unwrap().get(), 8);
        assert_eq!(size_bucket(64, 64).unwrap().get(), 32);
        assert_eq!(size_bucket(0, 64).unwrap().get(), 2);
        assert!(size_bucket(65, 64).is_err());
    }

    #[test]
    fn bucket_matches_enumerated_table() {
        // independent table: 0-7 -> 2, 8-15 -> 4, 16-31 -> 8, 32-63 -> 16, 64 -> 32
        for size in 0..=64usize {
            let expected = match size {
                0..=7 => 2,
                8..=15 => 4,
                16..=31 => 8,
                32..=63 => 16,
                _ => 32,
            };
            assert_eq!(size_bucket(size, 64).unwrap().get(), expected, "size {size}");
        }
    }
}
