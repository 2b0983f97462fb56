use crate::compression::{compress_unit, CacheLineData, CompressedBlock, Encoding};

use super::LcpError;

/// A line codec adapted to fixed-size LCP slots.
///
/// Every page picks one target `(c_type, C*)`; a line either encodes into
/// exactly `C*` bytes under that target or becomes an exception.
pub trait PageCodec: Send + Sync {
    fn name(&self) -> &'static str;

    /// Candidate targets as `(c_type, C*)`; `c_type` is 1..=7.
    fn targets(&self, line_size: usize) -> Vec<(u8, usize)>;

    /// Slot payload of exactly `C*` bytes, or `None` if the line needs an
    /// exception slot.
    fn encode(&self, c_type: u8, line: &CacheLineData) -> Option<Vec<u8>>;

    fn decode(&self, c_type: u8, slot: &[u8], line_size: usize) -> Result<CacheLineData, LcpError>;

    fn fits(&self, c_type: u8, line: &CacheLineData) -> bool {
        self.encode(c_type, line).is_some()
    }
}

/// BΔI restricted to one encoding per page.
///
/// `c_type` is the encoding code (RepValues = 1 … B2D1 = 7). Slots use plain
/// B+Δ with the first element as base, so `C*` is exactly the table size.
#[derive(Debug, Default, Clone, Copy)]
pub struct BdiPageCodec;

fn encoding_of(c_type: u8) -> Option<Encoding> {
    Encoding::from_code(c_type).filter(|e| (1..=7).contains(&e.code()))
}

impl PageCodec for BdiPageCodec {
    fn name(&self) -> &'static str {
        "bdi"
    }

    fn targets(&self, line_size: usize) -> Vec<(u8, usize)> {
        (1..=7u8)
            .map(|t| (t, encoding_of(t).unwrap().compressed_size(line_size)))
            .collect()
    }

    fn encode(&self, c_type: u8, line: &CacheLineData) -> Option<Vec<u8>> {
        let enc = encoding_of(c_type)?;
        if enc == Encoding::RepValues {
            let first = line.element(0, 8);
            return line.elements(8).all(|v| v == first).then(|| first.to_le_bytes().to_vec());
        }
        let (k, d) = (enc.base_width()?, enc.delta_width()?);
        let block = compress_unit(line, k, d, false).ok()??;
        let mut out = block.base.to_le_bytes()[..k].to_vec();
        for delta in &block.deltas {
            out.extend_from_slice(&delta.to_le_bytes()[..d]);
        }
        Some(out)
    }

    fn decode(&self, c_type: u8, slot: &[u8], line_size: usize) -> Result<CacheLineData, LcpError> {
        let enc = encoding_of(c_type).ok_or(LcpError::CType(c_type))?;
        let expected = enc.compressed_size(line_size);
        if slot.len() != expected {
            return Err(LcpError::Codec(format!("slot of {} bytes, expected {expected}", slot.len())));
        }
        let le = |b: &[u8]| {
            let mut buf = [0u8; 8];
            buf[..b.len()].copy_from_slice(b);
            u64::from_le_bytes(buf)
        };
        let block = if enc == Encoding::RepValues {
            CompressedBlock {
                encoding: enc,
                line_size,
                base: le(slot),
                zero_base_mask: 0,
                deltas: Vec::new(),
                raw: Vec::new(),
            }
        } else {
            let (k, d) = (enc.base_width().unwrap(), enc.delta_width().unwrap());
            let shift = 64 - 8 * d as u32;
            let deltas = slot[k..]
                .chunks(d)
                .map(|c| ((le(c) << shift) as i64) >> shift)
                .collect();
            CompressedBlock {
                encoding: enc,
                line_size,
                base: le(&slot[..k]),
                zero_base_mask: 0,
                deltas,
                raw: Vec::new(),
            }
        };
        crate::compression::decompress_line(&block).map_err(|e| LcpError::Codec(e.to_string()))
    }
}

/// Stand-in for codecs whose internals are out of scope.
///
/// A line fits target `C*` when all its bytes past `C* - 1` are zero; the slot
/// stores a length byte and that prefix. The default targets are 16, 21, 32
/// and 44 bytes.
#[derive(Debug, Clone)]
pub struct TrimCodec {
    pub sizes: Vec<usize>,
}

impl Default for TrimCodec {
    fn default() -> Self {
        Self {
            sizes: vec![16, 21, 32, 44],
        }
    }
}

impl TrimCodec {
    fn size_of(&self, c_type: u8) -> Option<usize> {
        self.sizes.get((c_type as usize).checked_sub(1)?).copied()
    }
}

impl PageCodec for TrimCodec {
    fn name(&self) -> &'static str {
        "trim"
    }

    fn targets(&self, _line_size: usize) -> Vec<(u8, usize)> {
        self.sizes.iter().enumerate().map(|(i, &s)| (i as u8 + 1, s)).collect()
    }

    fn encode(&self, c_type: u8, line: &CacheLineData) -> Option<Vec<u8>> {
        let c_star = self.size_of(c_type)?;
        let bytes = line.as_bytes();
        let used = bytes.iter().rposition(|&b| b != 0).map_or(0, |p| p + 1);
        if used + 1 > c_star || used > u8::MAX as usize {
            return None;
        }
        let mut out = vec![0u8; c_star];
        out[0] = used as u8;
        out[1..=used].copy_from_slice(&bytes[..used]);
        Some(out)
    }

    fn decode(&self, c_type: u8, slot: &[u8], line_size: usize) -> Result<CacheLineData, LcpError> {
        let c_star = self.size_of(c_type).ok_or(LcpError::CType(c_type))?;
        let used = *slot.first().ok_or_else(|| LcpError::Codec("empty slot".into()))? as usize;
        if slot.len() != c_star || used + 1 > c_star || used > line_size {
            return Err(LcpError::Codec(format!("bad trim slot (len {}, used {used})", slot.len())));
        }
        let mut bytes = vec![0u8; line_size];
        bytes[..used].copy_from_slice(&slot[1..=used]);
        CacheLineData::new(bytes).map_err(|e| LcpError::Codec(e.to_string()))
    }
}
