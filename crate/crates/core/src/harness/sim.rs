use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use super::config::{Policy, SimConfig, ToggleSection};
use super::reuse::reuse_distances;
use super::trace::TraceRecord;
use super::HarnessError;
use crate::cache::{CacheError, CompressedCache, Eviction};
use crate::compression::{compress_line, CacheLineData, Codec, Encoding};
use crate::lcp::{LcpMemory, LcpStats};
use crate::toggles::{ec_decide, mc_transform, Channel, EcDecision, EcInputs};
use crate::vway::VwayCache;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const CSV_VERSION: u32 = 1;

/// Eight 8-byte bins plus one for uncompressed lines.
pub const HIST_BINS: usize = 9;

/// Histogram bin of a compressed size: `size / 8`, or the last bin when the
/// line is stored at full size.
pub fn size_hist_bin(size_bytes: usize, line_size: usize) -> usize {
    if size_bytes >= line_size {
        HIST_BINS - 1
    } else {
        (size_bytes / 8).min(HIST_BINS - 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReuseBySize {
    pub bin: usize,
    /// Accesses in this bin that reused an earlier address.
    pub samples: u64,
    pub mean_request_distance: f64,
    pub mean_stack_distance: f64,
    pub median_stack_distance: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SipSummary {
    pub decisions: u64,
    pub prioritized_bins: Vec<usize>,
    pub last_decision_ctrs: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VwaySummary {
    pub decisions: u64,
    pub prioritized_bins: Vec<usize>,
    pub gmve_enabled: bool,
    pub tie_evictions: u64,
    pub last_region_misses: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcpReport {
    pub stats: LcpStats,
    pub md_hit_rate: f64,
    /// Pages per physical size in bytes; zero pages under 0.
    pub page_size_distribution: BTreeMap<usize, u64>,
    pub footprint_bytes: u64,
    pub pages: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ToggleReport {
    pub transfers: u64,
    pub sent_compressed: u64,
    pub sent_uncompressed: u64,
    pub onchip: u64,
    pub dram: u64,
    pub flits: u64,
    /// The same transfers, all sent uncompressed on a separate link.
    pub raw_onchip: u64,
    pub raw_dram: u64,
    pub raw_flits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub policy: String,
    pub codec: String,
    pub seed: u64,
    pub accesses: u64,
    pub reads: u64,
    pub writes: u64,
    pub hits: u64,
    pub misses: u64,
    pub insertions: u64,
    pub writebacks: u64,
    pub instructions: u64,
    pub mpki: f64,
    pub bus_bytes: u64,
    pub bpki: f64,
    pub effective_compression_ratio: f64,
    pub avg_used_segments: f64,
    pub size_histogram: Vec<u64>,
    pub reuse_by_size: Vec<ReuseBySize>,
    pub sip: Option<SipSummary>,
    pub vway: Option<VwaySummary>,
    pub lcp: Option<LcpReport>,
    pub toggles: Option<ToggleReport>,
}

pub fn effective_compression_ratio(report: &RunReport) -> f64 {
    report.effective_compression_ratio
}

fn per_kilo(count: u64, instructions: u64) -> f64 {
    if instructions == 0 {
        0.0
    } else {
        count as f64 * 1000.0 / instructions as f64
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn csv_header() -> String {
        let mut cols: Vec<String> = [
            "csv_version", "policy", "codec", "seed", "accesses", "reads", "writes", "hits", "misses",
            "insertions", "writebacks", "instructions", "mpki", "bus_bytes", "bpki",
            "effective_compression_ratio", "avg_used_segments",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cols.extend((0..HIST_BINS - 1).map(|b| format!("hist_{}_{}", b * 8, b * 8 + 7)));
        cols.push("hist_full".into());
        cols.extend(
            ["toggles_onchip", "toggles_dram", "toggles_raw_onchip", "toggles_raw_dram", "lcp_type1", "lcp_type2", "lcp_md_hit_rate", "lcp_footprint_bytes"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut row = String::new();
        write!(
            row,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{},{:.6},{:.6},{:.6}",
            CSV_VERSION,
            self.policy,
            self.codec,
            self.seed,
            self.accesses,
            self.reads,
            self.writes,
            self.hits,
            self.misses,
            self.insertions,
            self.writebacks,
            self.instructions,
            self.mpki,
            self.bus_bytes,
            self.bpki,
            self.effective_compression_ratio,
            self.avg_used_segments
        )
        .unwrap();
        for h in &self.size_histogram {
            write!(row, ",{h}").unwrap();
        }
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        let t = self.toggles.as_ref();
        let l = self.lcp.as_ref();
        write!(
            row,
            ",{},{},{},{},{},{},{},{}",
            opt(t.map(|t| t.onchip)),
            opt(t.map(|t| t.dram)),
            opt(t.map(|t| t.raw_onchip)),
            opt(t.map(|t| t.raw_dram)),
            opt(l.map(|l| l.stats.type1_overflows)),
            opt(l.map(|l| l.stats.type2_overflows)),
            l.map(|l| format!("{:.6}", l.md_hit_rate)).unwrap_or_default(),
            opt(l.map(|l| l.footprint_bytes)),
        )
        .unwrap();
        row
    }

    /// Header and one data row.
    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::csv_header(), self.csv_row())
    }
}

enum Model {
    Local(CompressedCache),
    Global(VwayCache),
}

impl Model {
    fn access(&mut self, addr: u64, write: bool, enc: Encoding, size: usize) -> Result<(bool, Vec<Eviction>), CacheError> {
        match self {
            Model::Local(c) => c.access(addr, write, enc, size).map(|o| (o.hit, o.evicted)),
            Model::Global(c) => c.access(addr, write, enc, size).map(|o| (o.hit, o.evicted)),
        }
    }

    fn occupancy(&self) -> (usize, usize) {
        match self {
            Model::Local(c) => (c.resident_bytes(), c.used_segments()),
            Model::Global(c) => (c.resident_bytes(), c.used_segments()),
        }
    }
}

/// Installs every page the trace touches, filled with the first value read
/// from each line (zeros for lines first written or never touched).
pub(crate) fn install_first_touch(lcp: &mut LcpMemory, trace: &[TraceRecord]) -> Result<(), HarnessError> {
    let g = lcp.geometry().clone();
    let zero = CacheLineData::zeroed(g.line_size).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut pages: BTreeMap<u64, Vec<Option<CacheLineData>>> = BTreeMap::new();
    for r in trace {
        let a = r.line_addr();
        let slot = &mut pages.entry(a / g.page_size as u64).or_insert_with(|| vec![None; g.lines_per_page()])
            [(a % g.page_size as u64) as usize / g.line_size];
        if slot.is_none() {
            *slot = Some(if r.op.is_write() { zero.clone() } else { r.data.clone() });
        }
    }
    for (page, lines) in pages {
        let lines: Vec<_> = lines.into_iter().map(|l| l.unwrap_or_else(|| zero.clone())).collect();
        lcp.install_page(page, &lines, false)?;
    }
    Ok(())
}

pub(crate) fn lcp_report(lcp: &LcpMemory) -> LcpReport {
    LcpReport {
        stats: lcp.stats().clone(),
        md_hit_rate: lcp.md_cache().hit_rate(),
        page_size_distribution: lcp.page_size_distribution(),
        footprint_bytes: lcp.footprint_bytes(),
        pages: lcp.page_count(),
    }
}

/// Per-bin reuse summary, bins taken from each access's compressed size.
pub(crate) fn reuse_by_size(trace: &[TraceRecord], bins: &[usize]) -> Vec<ReuseBySize> {
    let addrs: Vec<u64> = trace.iter().map(|r| r.line_addr()).collect();
    let mut per_bin: Vec<Vec<(u64, u64)>> = vec![Vec::new(); HIST_BINS];
    for (d, &b) in reuse_distances(&addrs).iter().zip(bins) {
        if let Some(d) = d {
            per_bin[b].push((d.request, d.stack));
        }
    }
    per_bin
        .into_iter()
        .enumerate()
        .map(|(bin, v)| {
            let n = v.len() as u64;
            let mean = |f: fn(&(u64, u64)) -> u64| if n == 0 { 0.0 } else { v.iter().map(f).sum::<u64>() as f64 / n as f64 };
            let mut stacks: Vec<u64> = v.iter().map(|x| x.1).collect();
            stacks.sort_unstable();
            ReuseBySize {
                bin,
                samples: n,
                mean_request_distance: mean(|x| x.0),
                mean_stack_distance: mean(|x| x.1),
                median_stack_distance: stacks.get(stacks.len() / 2).copied().unwrap_or(0),
            }
        })
        .collect()
}

struct Link {
    cfg: ToggleSection,
    compress: bool,
    chan: Channel,
    raw: Channel,
    report: ToggleReport,
}

impl Link {
    /// Sends one line and returns the bus bytes it took.
    fn transfer(&mut self, line: &CacheLineData) -> u64 {
        let raw = line.as_bytes();
        self.raw.send(raw);
        self.report.transfers += 1;
        let block = compress_line(line);
        let mut send_compressed = self.compress && self.cfg.bus_compression && block.encoding != Encoding::NoCompr;
        let payload = mc_transform(&block, self.cfg.layout);
        if send_compressed && self.cfg.energy_control {
            let inputs = EcInputs {
                t0: self.chan.cost(raw),
                t1: self.chan.cost(&payload),
                cr: raw.len() as f64 / block.size_bytes() as f64,
                bu: self.cfg.bu,
            };
            send_compressed = ec_decide(inputs, self.cfg.ec_params()) == EcDecision::SendCompressed;
        }
        if send_compressed {
            self.chan.send(&payload);
            self.report.sent_compressed += 1;
            block.size_bytes().div_ceil(self.cfg.granule_bytes) as u64 * self.cfg.granule_bytes as u64
        } else {
            self.chan.send(raw);
            self.report.sent_uncompressed += 1;
            raw.len() as u64
        }
    }

    fn finish(mut self) -> ToggleReport {
        self.report.onchip = self.chan.toggles();
        self.report.dram = self.chan.dram_toggles();
        self.report.flits = self.chan.flits();
        self.report.raw_onchip = self.raw.toggles();
        self.report.raw_dram = self.raw.dram_toggles();
        self.report.raw_flits = self.raw.flits();
        self.report
    }
}

/// Runs `trace` through the configured cache, memory backend and link.
pub fn run_simulation(config: &SimConfig, trace: &[TraceRecord]) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let g = config.geometry;
    if let Some((i, r)) = trace.iter().enumerate().find(|(_, r)| r.data.line_size() != g.line_size) {
        return Err(HarnessError::LineSizeMismatch {
            record: i,
            trace: r.data.line_size(),
            config: g.line_size,
        });
    }
    let codec: Box<dyn Codec> = config.codec.build();
    let rrip = config.rrip()?;
    let mut model = match config.policy.policy() {
        Policy::Local(p) => Model::Local(CompressedCache::new(g, p, rrip, config.sip)?),
        Policy::Global(p) => Model::Global(VwayCache::new(g, p, config.vway)?),
    };
    let mut lcp = match &config.lcp {
        Some(s) => {
            let mut m = LcpMemory::new(s.geometry.clone(), s.codec.build(), s.md_entries)?;
            install_first_touch(&mut m, trace)?;
            Some(m)
        }
        None => None,
    };
    let mut link = config
        .toggles
        .map(|cfg| -> Result<Link, HarnessError> {
            Ok(Link {
                cfg,
                compress: codec.name() != "none",
                chan: Channel::new(cfg.flit_bytes)?,
                raw: Channel::new(cfg.flit_bytes)?,
                report: ToggleReport::default(),
            })
        })
        .transpose()?;

    let mut shadow: HashMap<u64, CacheLineData> = HashMap::new();
    let mut hist = vec![0u64; HIST_BINS];
    let mut bins = Vec::with_capacity(trace.len());
    let (mut hits, mut misses, mut writes, mut writebacks, mut bus_bytes) = (0u64, 0u64, 0u64, 0u64, 0u64);
    let (mut ratio_sum, mut ratio_samples, mut seg_sum) = (0.0f64, 0u64, 0.0f64);

    for r in trace {
        let addr = r.line_addr();
        let (enc, size) = codec.classify(&r.data);
        bins.push(size_hist_bin(size, g.line_size));
        if r.op.is_write() {
            writes += 1;
            shadow.insert(addr, r.data.clone());
        }
        let (hit, evicted) = model.access(addr, r.op.is_write(), enc, size)?;
        if hit {
            hits += 1;
        } else {
            misses += 1;
            hist[size_hist_bin(size, g.line_size)] += 1;
            let fill = match lcp.as_mut() {
                Some(m) => m.read(addr)?.line,
                None => shadow.get(&addr).cloned().unwrap_or_else(|| r.data.clone()),
            };
            bus_bytes += match link.as_mut() {
                Some(l) => l.transfer(&fill),
                None => g.line_size as u64,
            };
        }
        for e in evicted.iter().filter(|e| e.dirty) {
            writebacks += 1;
            let data = shadow
                .get(&e.addr)
                .cloned()
                .ok_or_else(|| HarnessError::Invariant(format!("dirty line {:#x} was never written", e.addr)))?;
            if let Some(m) = lcp.as_mut() {
                m.writeback(e.addr, &data)?;
            }
            bus_bytes += match link.as_mut() {
                Some(l) => l.transfer(&data),
                None => g.line_size as u64,
            };
        }
        let (resident, used) = model.occupancy();
        if used > 0 {
            let ratio = resident as f64 / (used * g.segment_bytes) as f64;
            ratio_sum += ratio.min(g.tag_factor as f64);
            ratio_samples += 1;
        }
        seg_sum += used as f64 / g.num_sets() as f64;
    }

    let instructions = trace.last().map_or(0, |r| r.icount);
    let accesses = trace.len() as u64;
    let (sip, vway) = match &model {
        Model::Local(c) => (
            c.sip().map(|s| SipSummary {
                decisions: s.decisions(),
                prioritized_bins: s.prioritized_bins(),
                last_decision_ctrs: s.last_decision_ctrs().to_vec(),
            }),
            None,
        ),
        Model::Global(c) => (
            None,
            Some(VwaySummary {
                decisions: c.decisions(),
                prioritized_bins: c.prioritized_bins(),
                gmve_enabled: c.gmve_enabled(),
                tie_evictions: c.tie_evictions(),
                last_region_misses: c.last_duel().region_misses.clone(),
            }),
        ),
    };
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        policy: config.policy.policy().name().to_string(),
        codec: codec.name().to_string(),
        seed: config.seed,
        accesses,
        reads: accesses - writes,
        writes,
        hits,
        misses,
        insertions: misses,
        writebacks,
        instructions,
        mpki: per_kilo(misses, instructions),
        bus_bytes,
        bpki: per_kilo(bus_bytes, instructions),
        effective_compression_ratio: if ratio_samples == 0 { 0.0 } else { ratio_sum / ratio_samples as f64 },
        avg_used_segments: if accesses == 0 { 0.0 } else { seg_sum / accesses as f64 },
        size_histogram: hist,
        reuse_by_size: reuse_by_size(trace, &bins),
        sip,
        vway,
        lcp: lcp.as_ref().map(lcp_report),
        toggles: link.map(Link::finish),
    })
}
