use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::{batched_fetch, compress_page, LcpError, LcpGeometry, LcpPage, MdCache, PageCodec, PageLayout, WritebackOutcome};
use crate::compression::CacheLineData;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LcpStats {
    pub reads: u64,
    pub writebacks: u64,
    pub data_accesses: u64,
    pub metadata_accesses: u64,
    pub md_hits: u64,
    pub md_misses: u64,
    pub exception_reads: u64,
    pub zero_reads: u64,
    /// Extra usable lines delivered by batched fetches.
    pub batched_lines: u64,
    pub in_place: u64,
    pub exception_alloc: u64,
    pub exception_free: u64,
    pub type1_overflows: u64,
    pub type2_overflows: u64,
    pub penalty: u64,
}

/// Cost of one read of a line from compressed memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadOutcome {
    pub line: CacheLineData,
    /// `None` when the metadata cache was not consulted.
    pub md_hit: Option<bool>,
    pub data_accesses: u32,
    pub metadata_accesses: u32,
    pub exception: bool,
    pub fetched: Vec<(usize, bool)>,
}

/// Main memory made of LCP pages with a metadata cache in front.
///
/// On a metadata-cache miss the line is read speculatively from its slot
/// while the metadata is fetched; if the line turns out to be an exception a
/// second data access follows.
pub struct LcpMemory {
    geometry: LcpGeometry,
    codec: Box<dyn PageCodec>,
    pages: HashMap<u64, LcpPage>,
    md: MdCache,
    stats: LcpStats,
}

impl LcpMemory {
    pub fn new(geometry: LcpGeometry, codec: Box<dyn PageCodec>, md_entries: usize) -> Result<Self, LcpError> {
        geometry.validate()?;
        Ok(Self {
            geometry,
            codec,
            pages: HashMap::new(),
            md: MdCache::new(md_entries),
            stats: LcpStats::default(),
        })
    }

    pub fn geometry(&self) -> &LcpGeometry {
        &self.geometry
    }

    pub fn stats(&self) -> &LcpStats {
        &self.stats
    }

    pub fn md_cache(&self) -> &MdCache {
        &self.md
    }

    pub fn page(&self, page: u64) -> Option<&LcpPage> {
        self.pages.get(&page)
    }

    pub fn install_page(&mut self, page: u64, lines: &[CacheLineData], do_not_compress: bool) -> Result<(), LcpError> {
        let p = compress_page(lines, self.codec.as_ref(), &self.geometry, do_not_compress)?;
        self.pages.insert(page, p);
        Ok(())
    }

    fn locate(&self, addr: u64) -> (u64, usize) {
        let v = self.geometry.page_size as u64;
        (addr / v, ((addr % v) / self.geometry.line_size as u64) as usize)
    }

    fn page_mut(&mut self, page: u64) -> Result<&mut LcpPage, LcpError> {
        if !self.pages.contains_key(&page) {
            let zero = vec![CacheLineData::zeroed(self.geometry.line_size).map_err(|e| LcpError::Config(e.to_string()))?; self.geometry.lines_per_page()];
            self.install_page(page, &zero, false)?;
        }
        Ok(self.pages.get_mut(&page).unwrap())
    }

    pub fn read(&mut self, addr: u64) -> Result<ReadOutcome, LcpError> {
        let (page_no, i) = self.locate(addr);
        self.page_mut(page_no)?;
        let page = &self.pages[&page_no];
        let line = page.read_line(i, self.codec.as_ref())?;
        self.stats.reads += 1;
        let mut out = ReadOutcome {
            line,
            md_hit: None,
            data_accesses: 0,
            metadata_accesses: 0,
            exception: false,
            fetched: Vec::new(),
        };
        match page.layout {
            PageLayout::Zero => {
                self.stats.zero_reads += 1;
            }
            PageLayout::Uncompressed => {
                out.data_accesses = 1;
                out.fetched = vec![(i, true)];
            }
            PageLayout::Compressed => {
                let hit = self.md.access(page_no);
                out.md_hit = Some(hit);
                out.exception = page.is_exception(i);
                if !hit {
                    out.metadata_accesses = 1;
                }
                if page.is_zero_line(i) {
                    self.stats.zero_reads += 1;
                } else {
                    out.data_accesses = if !hit && out.exception { 2 } else { 1 };
                    out.fetched = batched_fetch(page, i, None);
                }
                if out.exception {
                    self.stats.exception_reads += 1;
                }
                if hit {
                    self.stats.md_hits += 1;
                } else {
                    self.stats.md_misses += 1;
                }
            }
        }
        self.stats.data_accesses += out.data_accesses as u64;
        self.stats.metadata_accesses += out.metadata_accesses as u64;
        self.stats.batched_lines += out.fetched.iter().filter(|f| f.1 && f.0 != i).count() as u64;
        Ok(out)
    }

    pub fn writeback(&mut self, addr: u64, line: &CacheLineData) -> Result<WritebackOutcome, LcpError> {
        let (page_no, i) = self.locate(addr);
        let compressed = self.page_mut(page_no)?.layout == PageLayout::Compressed;
        if compressed && !self.md.access(page_no) {
            self.stats.metadata_accesses += 1;
            self.stats.md_misses += 1;
        } else if compressed {
            self.stats.md_hits += 1;
        }
        let codec = self.codec.as_ref();
        let page = self.pages.get_mut(&page_no).unwrap();
        let outcome = page.writeback(i, line, codec)?;
        let s = &mut self.stats;
        s.writebacks += 1;
        s.data_accesses += 1;
        s.penalty += outcome.penalty();
        match outcome {
            WritebackOutcome::InPlace => s.in_place += 1,
            WritebackOutcome::ExceptionAlloc => s.exception_alloc += 1,
            WritebackOutcome::ExceptionFree => s.exception_free += 1,
            WritebackOutcome::Type1Overflow { .. } => s.type1_overflows += 1,
            WritebackOutcome::Type2Overflow { .. } => s.type2_overflows += 1,
        }
        Ok(outcome)
    }

    /// Pages per physical size in bytes (0 for zero pages).
    pub fn page_size_distribution(&self) -> BTreeMap<usize, u64> {
        let mut out = BTreeMap::new();
        for p in self.pages.values() {
            *out.entry(p.physical_size()).or_insert(0) += 1;
        }
        out
    }

    pub fn footprint_bytes(&self) -> u64 {
        self.pages.values().map(|p| p.physical_size() as u64).sum()
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }
}
