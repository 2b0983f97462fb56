use serde::Serialize;

use super::{
    exception_address, line_slot_address, n_avail, LcpError, LcpGeometry, PageCodec, PteExtension,
};
use crate::compression::CacheLineData;

/// Accounting units charged for migrating a page to a larger size.
pub const TYPE1_PENALTY: u64 = 20_000;

const MAGIC: &[u8; 4] = b"LCP1";
const FLAG_Z_BITS: u8 = 1;
const FLAG_UNCOMPRESSED: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PageLayout {
    Zero,
    Uncompressed,
    Compressed,
}

/// Per-line metadata: exception flag and index, exception-slot valid bits and
/// optional zero bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcpMetadata {
    pub e_bit: Vec<bool>,
    pub e_index: Vec<u16>,
    /// One per exception slot position (n of them; only n_avail are usable).
    pub v_bit: Vec<bool>,
    /// Empty unless the geometry enables z-bits.
    pub z_bit: Vec<bool>,
}

impl LcpMetadata {
    pub fn new(n: usize, z_bits: bool) -> Self {
        Self {
            e_bit: vec![false; n],
            e_index: vec![0; n],
            v_bit: vec![false; n],
            z_bit: if z_bits { vec![false; n] } else { Vec::new() },
        }
    }

    pub fn bit_len(&self, index_bits: usize) -> usize {
        self.e_bit.len() * (1 + index_bits) + self.v_bit.len() + self.z_bit.len()
    }

    /// Packs the fields LSB-first in the order e-bits, e-indices, v-bits,
    /// z-bits, padded to whole bytes.
    pub fn to_bytes(&self, index_bits: usize) -> Vec<u8> {
        let mut out = vec![0u8; self.bit_len(index_bits).div_ceil(8)];
        let mut pos = 0usize;
        let mut put = |value: u64, width: usize| {
            for b in 0..width {
                if value >> b & 1 == 1 {
                    out[pos / 8] |= 1 << (pos % 8);
                }
                pos += 1;
            }
        };
        self.e_bit.iter().for_each(|&b| put(b as u64, 1));
        self.e_index.iter().for_each(|&e| put(e as u64, index_bits));
        self.v_bit.iter().for_each(|&b| put(b as u64, 1));
        self.z_bit.iter().for_each(|&b| put(b as u64, 1));
        out
    }

    pub fn from_bytes(bytes: &[u8], n: usize, index_bits: usize, z_bits: bool) -> Result<Self, LcpError> {
        let mut meta = Self::new(n, z_bits);
        if bytes.len() * 8 < meta.bit_len(index_bits) {
            return Err(LcpError::Image("metadata region too short".into()));
        }
        let mut pos = 0usize;
        let mut get = |width: usize| {
            let mut v = 0u64;
            for b in 0..width {
                v |= ((bytes[pos / 8] >> (pos % 8) & 1) as u64) << b;
                pos += 1;
            }
            v
        };
        meta.e_bit.iter_mut().for_each(|b| *b = get(1) == 1);
        meta.e_index.iter_mut().for_each(|e| *e = get(index_bits) as u16);
        meta.v_bit.iter_mut().for_each(|b| *b = get(1) == 1);
        meta.z_bit.iter_mut().for_each(|b| *b = get(1) == 1);
        Ok(meta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WritebackOutcome {
    /// Overwrote the line's slot or its exception slot.
    InPlace,
    /// Line no longer fits `C*`; moved to a free exception slot.
    ExceptionAlloc,
    /// Line fits `C*` again; its exception slot was released.
    ExceptionFree,
    /// Page grew to a larger physical size with the same layout.
    Type1Overflow { from: usize, to: usize },
    /// Page no longer fits any size with its encoding; it was recompressed
    /// with another one or stored uncompressed.
    Type2Overflow { recompressed: bool },
}

impl WritebackOutcome {
    pub fn penalty(self) -> u64 {
        match self {
            WritebackOutcome::Type1Overflow { .. } => TYPE1_PENALTY,
            _ => 0,
        }
    }
}

/// One virtual page as laid out in main memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcpPage {
    geometry: LcpGeometry,
    pub layout: PageLayout,
    pub pte: PteExtension,
    /// Slot size; `C` for uncompressed pages and 0 for zero pages.
    pub c_star: usize,
    /// `n` slots of `c_star` bytes (raw lines when uncompressed).
    pub slots: Vec<Vec<u8>>,
    pub meta: LcpMetadata,
    /// `n_avail` exception slots of `C` bytes.
    pub exceptions: Vec<Vec<u8>>,
    pub do_not_compress: bool,
}

struct Choice {
    c_type: u8,
    c_star: usize,
    physical: usize,
}

fn line_fits_zero(geometry: &LcpGeometry, line: &CacheLineData) -> bool {
    geometry.z_bits && line.is_zero()
}

/// Smallest physical size (then smallest `C*`, then `c_type`) that holds
/// `lines`. With `strict`, the page must end up smaller than `V`.
fn best_choice(lines: &[CacheLineData], codec: &dyn PageCodec, geometry: &LcpGeometry, strict: bool) -> Option<Choice> {
    let mut best: Option<Choice> = None;
    for (c_type, c_star) in codec.targets(geometry.line_size) {
        let exceptions = lines
            .iter()
            .filter(|l| !line_fits_zero(geometry, l) && !codec.fits(c_type, l))
            .count();
        let physical = geometry
            .page_sizes
            .iter()
            .copied()
            .filter(|&p| !strict || p < geometry.page_size)
            .find(|&p| n_avail(p, c_star, geometry).is_some_and(|a| exceptions <= a));
        if let Some(physical) = physical {
            let better = best.as_ref().map_or(true, |b| {
                (physical, c_star, c_type) < (b.physical, b.c_star, b.c_type)
            });
            if better {
                best = Some(Choice { c_type, c_star, physical });
            }
        }
    }
    best
}

/// Lays out a page with the smallest footprint over the codec's targets.
///
/// All-zero pages need no storage. A page that cannot get below `V` (or is
/// flagged do-not-compress) is stored uncompressed.
pub fn compress_page(
    lines: &[CacheLineData],
    codec: &dyn PageCodec,
    geometry: &LcpGeometry,
    do_not_compress: bool,
) -> Result<LcpPage, LcpError> {
    geometry.validate()?;
    let n = geometry.lines_per_page();
    if lines.len() != n {
        return Err(LcpError::Config(format!("expected {n} lines, got {}", lines.len())));
    }
    if let Some(bad) = lines.iter().find(|l| l.line_size() != geometry.line_size) {
        return Err(LcpError::Config(format!("line of {} bytes in a {}-byte geometry", bad.line_size(), geometry.line_size)));
    }
    if !do_not_compress && lines.iter().all(CacheLineData::is_zero) {
        return Ok(LcpPage::zero(geometry.clone()));
    }
    let choice = if do_not_compress {
        None
    } else {
        best_choice(lines, codec, geometry, true)
    };
    let mut page = match choice {
        Some(c) => LcpPage::build(lines, codec, geometry, c),
        None => LcpPage::uncompressed(lines, geometry),
    };
    page.do_not_compress = do_not_compress;
    Ok(page)
}

impl LcpPage {
    fn zero(geometry: LcpGeometry) -> Self {
        let n = geometry.lines_per_page();
        let z = geometry.z_bits;
        Self {
            layout: PageLayout::Zero,
            pte: PteExtension {
                c_bit: true,
                c_type: 0,
                c_size: 0,
                c_base: 0,
                p_base: 0,
            },
            c_star: 0,
            slots: Vec::new(),
            meta: LcpMetadata::new(n, z),
            exceptions: Vec::new(),
            do_not_compress: false,
            geometry,
        }
    }

    fn uncompressed(lines: &[CacheLineData], geometry: &LcpGeometry) -> Self {
        let n = geometry.lines_per_page();
        Self {
            layout: PageLayout::Uncompressed,
            pte: PteExtension {
                c_bit: false,
                c_type: 0,
                c_size: geometry.c_size_of(geometry.page_size).unwrap(),
                c_base: 0,
                p_base: 0,
            },
            c_star: geometry.line_size,
            slots: lines.iter().map(|l| l.as_bytes().to_vec()).collect(),
            meta: LcpMetadata::new(n, geometry.z_bits),
            exceptions: Vec::new(),
            do_not_compress: false,
            geometry: geometry.clone(),
        }
    }

    fn build(lines: &[CacheLineData], codec: &dyn PageCodec, geometry: &LcpGeometry, c: Choice) -> Self {
        let n = geometry.lines_per_page();
        let avail = n_avail(c.physical, c.c_star, geometry).expect("choice fits");
        let mut page = Self {
            layout: PageLayout::Compressed,
            pte: PteExtension {
                c_bit: true,
                c_type: c.c_type,
                c_size: geometry.c_size_of(c.physical).unwrap(),
                c_base: 0,
                p_base: 0,
            },
            c_star: c.c_star,
            slots: vec![vec![0; c.c_star]; n],
            meta: LcpMetadata::new(n, geometry.z_bits),
            exceptions: vec![vec![0; geometry.line_size]; avail],
            do_not_compress: false,
            geometry: geometry.clone(),
        };
        let mut next = 0usize;
        for (i, line) in lines.iter().enumerate() {
            if line_fits_zero(geometry, line) {
                page.meta.z_bit[i] = true;
            } else if let Some(slot) = codec.encode(c.c_type, line) {
                page.slots[i] = slot;
            } else {
                page.meta.e_bit[i] = true;
                page.meta.e_index[i] = next as u16;
                page.meta.v_bit[next] = true;
                page.exceptions[next] = line.as_bytes().to_vec();
                next += 1;
            }
        }
        page
    }

    pub fn geometry(&self) -> &LcpGeometry {
        &self.geometry
    }

    /// Bytes of main memory the page occupies.
    pub fn physical_size(&self) -> usize {
        match self.layout {
            PageLayout::Zero => 0,
            _ => self.geometry.page_sizes[self.pte.c_size as usize],
        }
    }

    pub fn n_avail(&self) -> usize {
        self.exceptions.len()
    }

    pub fn exceptions_in_use(&self) -> usize {
        self.meta.v_bit.iter().filter(|&&v| v).count()
    }

    pub fn is_exception(&self, i: usize) -> bool {
        self.layout == PageLayout::Compressed && self.meta.e_bit[i]
    }

    /// Whether reading line `i` needs no data access.
    pub fn is_zero_line(&self, i: usize) -> bool {
        match self.layout {
            PageLayout::Zero => true,
            PageLayout::Compressed => self.meta.z_bit.get(i).copied().unwrap_or(false),
            PageLayout::Uncompressed => false,
        }
    }

    pub fn read_line(&self, i: usize, codec: &dyn PageCodec) -> Result<CacheLineData, LcpError> {
        let n = self.geometry.lines_per_page();
        if i >= n {
            return Err(LcpError::LineIndex { index: i, n });
        }
        let c = self.geometry.line_size;
        let to_line = |b: Vec<u8>| CacheLineData::new(b).map_err(|e| LcpError::Codec(e.to_string()));
        match self.layout {
            PageLayout::Zero => to_line(vec![0; c]),
            PageLayout::Uncompressed => to_line(self.slots[i].clone()),
            PageLayout::Compressed => {
                if self.is_zero_line(i) {
                    to_line(vec![0; c])
                } else if self.meta.e_bit[i] {
                    to_line(self.exceptions[self.meta.e_index[i] as usize].clone())
                } else {
                    codec.decode(self.pte.c_type, &self.slots[i], c)
                }
            }
        }
    }

    pub fn lines(&self, codec: &dyn PageCodec) -> Result<Vec<CacheLineData>, LcpError> {
        (0..self.geometry.lines_per_page()).map(|i| self.read_line(i, codec)).collect()
    }

    fn set_zero_bit(&mut self, i: usize, v: bool) {
        if let Some(z) = self.meta.z_bit.get_mut(i) {
            *z = v;
        }
    }

    fn free_exception(&mut self, i: usize) {
        let e = self.meta.e_index[i] as usize;
        self.meta.v_bit[e] = false;
        self.meta.e_bit[i] = false;
        self.meta.e_index[i] = 0;
        self.exceptions[e].iter_mut().for_each(|b| *b = 0);
    }

    /// Applies a dirty line writeback and reports which case it was.
    pub fn writeback(
        &mut self,
        i: usize,
        line: &CacheLineData,
        codec: &dyn PageCodec,
    ) -> Result<WritebackOutcome, LcpError> {
        let n = self.geometry.lines_per_page();
        if i >= n {
            return Err(LcpError::LineIndex { index: i, n });
        }
        match self.layout {
            PageLayout::Zero => {
                if line.is_zero() {
                    return Ok(WritebackOutcome::InPlace);
                }
                let mut lines = self.lines(codec)?;
                lines[i] = line.clone();
                let rebuilt = compress_page(&lines, codec, &self.geometry, self.do_not_compress)?;
                let outcome = if rebuilt.layout == PageLayout::Compressed {
                    WritebackOutcome::Type1Overflow {
                        from: 0,
                        to: rebuilt.physical_size(),
                    }
                } else {
                    WritebackOutcome::Type2Overflow { recompressed: false }
                };
                *self = rebuilt;
                Ok(outcome)
            }
            PageLayout::Uncompressed => {
                self.slots[i] = line.as_bytes().to_vec();
                Ok(WritebackOutcome::InPlace)
            }
            PageLayout::Compressed => self.writeback_compressed(i, line, codec),
        }
    }

    fn writeback_compressed(
        &mut self,
        i: usize,
        line: &CacheLineData,
        codec: &dyn PageCodec,
    ) -> Result<WritebackOutcome, LcpError> {
        if line_fits_zero(&self.geometry, line) {
            self.slots[i].iter_mut().for_each(|b| *b = 0);
            self.set_zero_bit(i, true);
            return Ok(if self.meta.e_bit[i] {
                self.free_exception(i);
                WritebackOutcome::ExceptionFree
            } else {
                WritebackOutcome::InPlace
            });
        }
        self.set_zero_bit(i, false);
        let encoded = codec.encode(self.pte.c_type, line);
        if self.meta.e_bit[i] {
            return Ok(match encoded {
                Some(slot) => {
                    self.free_exception(i);
                    self.slots[i] = slot;
                    WritebackOutcome::ExceptionFree
                }
                None => {
                    self.exceptions[self.meta.e_index[i] as usize] = line.as_bytes().to_vec();
                    WritebackOutcome::InPlace
                }
            });
        }
        if let Some(slot) = encoded {
            self.slots[i] = slot;
            return Ok(WritebackOutcome::InPlace);
        }
        if let Some(e) = (0..self.n_avail()).find(|&e| !self.meta.v_bit[e]) {
            self.meta.v_bit[e] = true;
            self.meta.e_bit[i] = true;
            self.meta.e_index[i] = e as u16;
            self.exceptions[e] = line.as_bytes().to_vec();
            return Ok(WritebackOutcome::ExceptionAlloc);
        }

        let mut lines = self.lines(codec)?;
        lines[i] = line.clone();
        let from = self.physical_size();
        let needed = self.exceptions_in_use() + 1;
        let larger = self
            .geometry
            .page_sizes
            .iter()
            .copied()
            .filter(|&p| p > from)
            .find(|&p| n_avail(p, self.c_star, &self.geometry).is_some_and(|a| needed <= a));
        if let Some(to) = larger {
            let choice = Choice {
                c_type: self.pte.c_type,
                c_star: self.c_star,
                physical: to,
            };
            let pte = self.pte;
            *self = LcpPage::build(&lines, codec, &self.geometry, choice);
            self.pte.p_base = pte.p_base;
            return Ok(WritebackOutcome::Type1Overflow { from, to });
        }
        let rebuilt = compress_page(&lines, codec, &self.geometry, self.do_not_compress)?;
        let recompressed = rebuilt.layout == PageLayout::Compressed;
        *self = rebuilt;
        Ok(WritebackOutcome::Type2Overflow { recompressed })
    }

    /// 16-byte header followed by the `P`-byte page body.
    ///
    /// Header: `"LCP1"`, c_type, c_size, c_base, flags (bit 0 z-bits, bit 1
    /// uncompressed), n (u32 LE), C* (u32 LE).
    pub fn image(&self) -> Vec<u8> {
        let g = &self.geometry;
        let mut flags = 0u8;
        if g.z_bits {
            flags |= FLAG_Z_BITS;
        }
        if self.layout == PageLayout::Uncompressed {
            flags |= FLAG_UNCOMPRESSED;
        }
        let mut out = Vec::with_capacity(16 + self.physical_size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[self.pte.c_type, self.pte.c_size, self.pte.c_base, flags]);
        out.extend_from_slice(&(g.lines_per_page() as u32).to_le_bytes());
        out.extend_from_slice(&(self.c_star as u32).to_le_bytes());
        let mut body = vec![0u8; self.physical_size()];
        match self.layout {
            PageLayout::Zero => {}
            PageLayout::Uncompressed => {
                for (i, s) in self.slots.iter().enumerate() {
                    body[i * g.line_size..(i + 1) * g.line_size].copy_from_slice(s);
                }
            }
            PageLayout::Compressed => {
                for (i, s) in self.slots.iter().enumerate() {
                    body[i * self.c_star..(i + 1) * self.c_star].copy_from_slice(s);
                }
                let m_off = g.lines_per_page() * self.c_star;
                let meta = self.meta.to_bytes(g.index_bits());
                body[m_off..m_off + meta.len()].copy_from_slice(&meta);
                let e_off = m_off + g.metadata_bytes();
                for (e, s) in self.exceptions.iter().enumerate() {
                    body[e_off + e * g.line_size..e_off + (e + 1) * g.line_size].copy_from_slice(s);
                }
            }
        }
        out.extend_from_slice(&body);
        out
    }
}

/// A parsed page image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageImage {
    pub c_type: u8,
    pub c_size: u8,
    pub c_base: u8,
    pub flags: u8,
    pub n: u32,
    pub c_star: u32,
    pub body: Vec<u8>,
}

impl PageImage {
    pub fn parse(bytes: &[u8]) -> Result<Self, LcpError> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(LcpError::Image("missing LCP1 header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        Ok(Self {
            c_type: bytes[4],
            c_size: bytes[5],
            c_base: bytes[6],
            flags: bytes[7],
            n: u32_at(8),
            c_star: u32_at(12),
            body: bytes[16..].to_vec(),
        })
    }

    /// Reads line `i` through the slot and exception address arithmetic.
    pub fn read_line(&self, i: usize, codec: &dyn PageCodec, geometry: &LcpGeometry) -> Result<CacheLineData, LcpError> {
        let c = geometry.line_size;
        let n = geometry.lines_per_page();
        if self.n as usize != n {
            return Err(LcpError::Image(format!("image has n = {}, geometry {n}", self.n)));
        }
        if (geometry.z_bits as u8) != (self.flags & FLAG_Z_BITS) {
            return Err(LcpError::Image("z-bit flag does not match geometry".into()));
        }
        let slice = |off: u64, len: usize| -> Result<Vec<u8>, LcpError> {
            let off = off as usize;
            self.body
                .get(off..off + len)
                .map(<[u8]>::to_vec)
                .ok_or_else(|| LcpError::Image(format!("read past body at {off}")))
        };
        let to_line = |b: Vec<u8>| CacheLineData::new(b).map_err(|e| LcpError::Codec(e.to_string()));
        if self.flags & FLAG_UNCOMPRESSED != 0 {
            return to_line(slice((i * c) as u64, c)?);
        }
        if self.c_type == 0 {
            return to_line(vec![0; c]);
        }
        let c_star = self.c_star as usize;
        // the body starts at the page origin, so address with p_base = c_base = 0
        let pte = PteExtension {
            c_bit: true,
            c_type: self.c_type,
            c_size: self.c_size,
            c_base: 0,
            p_base: 0,
        };
        let m_off = n * c_star;
        let meta = LcpMetadata::from_bytes(
            &slice(m_off as u64, geometry.metadata_bytes())?,
            n,
            geometry.index_bits(),
            geometry.z_bits,
        )?;
        if meta.z_bit.get(i).copied().unwrap_or(false) {
            return to_line(vec![0; c]);
        }
        if meta.e_bit[i] {
            let addr = exception_address(&pte, meta.e_index[i] as usize, c_star, geometry)?;
            return to_line(slice(addr, c)?);
        }
        let addr = line_slot_address(&pte, i, c_star, geometry)?;
        codec.decode(self.c_type, &slice(addr, c_star)?, c)
    }
}

/// Lines brought in by one `C`-byte fetch that covers line `i`.
///
/// A fetch covers `⌊C / C*⌋` consecutive slots aligned to that width. A slot
/// is usable unless it holds a stale copy of an exception line, or `keep`
/// rejects it. Lines of uncompressed pages and exception lines come alone.
pub fn batched_fetch(page: &LcpPage, i: usize, keep: Option<&dyn Fn(usize) -> bool>) -> Vec<(usize, bool)> {
    if page.layout != PageLayout::Compressed || page.meta.e_bit[i] {
        return vec![(i, true)];
    }
    let g = page.geometry();
    let per_fetch = (g.line_size / page.c_star.max(1)).max(1);
    let start = i / per_fetch * per_fetch;
    let end = (start + per_fetch).min(g.lines_per_page());
    (start..end)
        .map(|j| {
            let ok = !page.meta.e_bit[j] && (j == i || keep.map_or(true, |f| f(j)));
            (j, ok)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcp::{BdiPageCodec, TrimCodec};

    fn narrow(v: u64) -> CacheLineData {
        CacheLineData::from_u64s(&[v, v + 1, v + 2, v + 3, v + 4, v + 5, v + 6, v + 7]).unwrap()
    }

    fn noisy(seed: u64) -> CacheLineData {
        let w: Vec<u64> = (0..8).map(|i| (seed + i).wrapping_mul(0x9E37_79B9_7F4A_7C15)).collect();
        CacheLineData::from_u64s(&w).unwrap()
    }

    #[test]
    fn zero_page_needs_no_storage() {
        let g = LcpGeometry::default();
        let lines = vec![CacheLineData::zeroed(64).unwrap(); 64];
        let page = compress_page(&lines, &BdiPageCodec, &g, false).unwrap();
        assert_eq!(page.layout, PageLayout::Zero);
        assert_eq!(page.pte.c_type, 0);
        assert_eq!(page.physical_size(), 0);
    }

    #[test]
    fn incompressible_page_stays_uncompressed() {
        let g = LcpGeometry::default();
        let lines: Vec<_> = (0..64).map(|i| noisy(i * 8)).collect();
        let page = compress_page(&lines, &BdiPageCodec, &g, false).unwrap();
        assert_eq!(page.layout, PageLayout::Uncompressed);
        assert!(!page.pte.c_bit);
        assert_eq!(page.lines(&BdiPageCodec).unwrap(), lines);
    }

    #[test]
    fn sixty_narrow_lines_and_four_exceptions() {
        let g = LcpGeometry::default();
        let mut lines: Vec<_> = (0..64).map(|i| narrow(0x1000 * (i + 1))).collect();
        for i in [3, 17, 40, 63] {
            lines[i] = noisy(i as u64);
        }
        let page = compress_page(&lines, &BdiPageCodec, &g, false).unwrap();
        assert_eq!((page.c_star, page.physical_size()), (16, 2048));
        assert_eq!(page.exceptions_in_use(), 4);
        assert_eq!(page.n_avail(), 15);
        assert_eq!(page.lines(&BdiPageCodec).unwrap(), lines);
    }

    #[test]
    fn metadata_bytes_round_trip() {
        let g = LcpGeometry { z_bits: true, ..LcpGeometry::default() };
        let mut meta = LcpMetadata::new(64, true);
        meta.e_bit[5] = true;
        meta.e_index[5] = 63;
        meta.v_bit[2] = true;
        meta.z_bit[63] = true;
        let bytes = meta.to_bytes(6);
        assert_eq!(bytes.len(), g.metadata_bytes());
        assert_eq!(meta.bit_len(6), g.metadata_bits());
        assert_eq!(LcpMetadata::from_bytes(&bytes, 64, 6, true).unwrap(), meta);
    }

    #[test]
    fn writeback_cases() {
        let g = LcpGeometry::default();
        let codec = BdiPageCodec;
        let mut lines: Vec<_> = (0..64).map(|i| narrow(0x1000 * (i + 1))).collect();
        lines[0] = noisy(1);
        let mut page = compress_page(&lines, &codec, &g, false).unwrap();
        assert_eq!(page.physical_size(), 2048);
        assert_eq!(page.writeback(1, &narrow(5), &codec).unwrap(), WritebackOutcome::InPlace);
        assert_eq!(page.writeback(2, &noisy(2), &codec).unwrap(), WritebackOutcome::ExceptionAlloc);
        assert_eq!(page.writeback(0, &narrow(9), &codec).unwrap(), WritebackOutcome::ExceptionFree);
        assert_eq!(page.writeback(2, &noisy(3), &codec).unwrap(), WritebackOutcome::InPlace);
        // fill the remaining 14 exception slots, then overflow
        for i in 3..17 {
            assert_eq!(page.writeback(i, &noisy(i as u64 * 8), &codec).unwrap(), WritebackOutcome::ExceptionAlloc);
        }
        let out = page.writeback(17, &noisy(999), &codec).unwrap();
        assert_eq!(out, WritebackOutcome::Type1Overflow { from: 2048, to: 4096 });
        assert_eq!(out.penalty(), TYPE1_PENALTY);
        assert_eq!(page.read_line(17, &codec).unwrap(), noisy(999));
        assert_eq!(page.read_line(1, &codec).unwrap(), narrow(5));
    }

    #[test]
    fn type2_falls_back_to_uncompressed() {
        let g = LcpGeometry::default();
        let codec = BdiPageCodec;
        let lines: Vec<_> = (0..64).map(|i| narrow(0x1000 * (i + 1))).collect();
        let mut page = compress_page(&lines, &codec, &g, false).unwrap();
        assert_eq!(page.c_star, 16);
        let mut seen_type2 = false;
        for i in 0..64 {
            if let WritebackOutcome::Type2Overflow { .. } = page.writeback(i, &noisy(i as u64 * 8), &codec).unwrap() {
                seen_type2 = true;
                break;
            }
        }
        assert!(seen_type2);
    }

    #[test]
    fn zero_page_materializes_on_write() {
        let g = LcpGeometry::default();
        let codec = BdiPageCodec;
        let mut page = compress_page(&vec![CacheLineData::zeroed(64).unwrap(); 64], &codec, &g, false).unwrap();
        let out = page.writeback(7, &narrow(0x40), &codec).unwrap();
        assert!(matches!(out, WritebackOutcome::Type1Overflow { from: 0, .. }));
        assert_eq!(page.read_line(7, &codec).unwrap(), narrow(0x40));
    }

    #[test]
    fn z_bits_skip_slots() {
        let g = LcpGeometry { z_bits: true, ..LcpGeometry::default() };
        let codec = BdiPageCodec;
        let mut lines = vec![CacheLineData::zeroed(64).unwrap(); 64];
        lines[10] = narrow(0x77);
        let page = compress_page(&lines, &codec, &g, false).unwrap();
        assert!(page.is_zero_line(0));
        assert!(!page.is_zero_line(10));
        assert_eq!(page.lines(&codec).unwrap(), lines);
    }

    #[test]
    fn image_reads_match_page() {
        let codec = TrimCodec::default();
        for z in [false, true] {
            let g = LcpGeometry { z_bits: z, ..LcpGeometry::default() };
            let lines: Vec<_> = (0..64u64)
                .map(|i| {
                    let mut b = vec![0u8; 64];
                    let used = if i % 16 == 15 { 64 } else { [0usize, 10, 12, 14][(i % 4) as usize] };
                    b[..used].iter_mut().for_each(|x| *x = i as u8 + 1);
                    CacheLineData::new(b).unwrap()
                })
                .collect();
            let page = compress_page(&lines, &codec, &g, false).unwrap();
            assert_eq!(page.layout, PageLayout::Compressed);
            let image = PageImage::parse(&page.image()).unwrap();
            assert_eq!(image.body.len(), page.physical_size());
            for (i, line) in lines.iter().enumerate() {
                assert_eq!(&image.read_line(i, &codec, &g).unwrap(), line);
            }
        }
    }

    #[test]
    fn batched_fetch_windows() {
        let g = LcpGeometry::default();
        let codec = BdiPageCodec;
        let mut lines: Vec<_> = (0..64).map(|i| narrow(0x1000 * (i + 1))).collect();
        lines[6] = noisy(6);
        let page = compress_page(&lines, &codec, &g, false).unwrap();
        assert_eq!(page.c_star, 16);
        let got = batched_fetch(&page, 1, None);
        assert_eq!(got, vec![(0, true), (1, true), (2, true), (3, true)]);
        let got = batched_fetch(&page, 5, None);
        assert_eq!(got, vec![(4, true), (5, true), (6, false), (7, true)]);
        let only_odd = |j: usize| j % 2 == 1;
        let got = batched_fetch(&page, 4, Some(&only_odd));
        assert_eq!(got, vec![(4, true), (5, true), (6, false), (7, true)]);
        let got = batched_fetch(&page, 1, Some(&only_odd));
        assert_eq!(got, vec![(0, false), (1, true), (2, false), (3, true)]);
    }
}
