//! Trace-level analyses behind the `stats`, `lcp` and `toggles` commands.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::config::LcpSection;
use super::sim::{install_first_touch, lcp_report, reuse_by_size, size_hist_bin, LcpReport, ReuseBySize, HIST_BINS};
use super::trace::TraceRecord;
use super::HarnessError;
use crate::compression::{compress_line, Encoding};
use crate::lcp::LcpMemory;
use crate::toggles::{ec_decide, mc_transform, Channel, EcDecision, EcInputs, EcParams, McLayout};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStats {
    pub records: u64,
    pub reads: u64,
    pub writes: u64,
    pub distinct_lines: u64,
    pub instructions: u64,
    /// Records per best BΔI encoding.
    pub encodings: BTreeMap<String, u64>,
    pub size_histogram: Vec<u64>,
    pub mean_compressed_bytes: f64,
    pub reuse_by_size: Vec<ReuseBySize>,
}

pub fn trace_stats(trace: &[TraceRecord]) -> TraceStats {
    let mut encodings = BTreeMap::new();
    let mut hist = vec![0u64; HIST_BINS];
    let mut bins = Vec::with_capacity(trace.len());
    let mut total = 0u64;
    for r in trace {
        let b = compress_line(&r.data);
        *encodings.entry(b.encoding.name().to_string()).or_insert(0) += 1;
        let bin = size_hist_bin(b.size_bytes(), r.data.line_size());
        hist[bin] += 1;
        bins.push(bin);
        total += b.size_bytes() as u64;
    }
    let writes = trace.iter().filter(|r| r.op.is_write()).count() as u64;
    TraceStats {
        records: trace.len() as u64,
        reads: trace.len() as u64 - writes,
        writes,
        distinct_lines: trace.iter().map(|r| r.line_addr()).collect::<HashSet<_>>().len() as u64,
        instructions: trace.last().map_or(0, |r| r.icount),
        encodings,
        size_histogram: hist,
        mean_compressed_bytes: if trace.is_empty() { 0.0 } else { total as f64 / trace.len() as f64 },
        reuse_by_size: reuse_by_size(trace, &bins),
    }
}

/// Replays a trace directly against LCP memory: reads read, writes write
/// back. Pages start from the first value seen for each line.
pub fn lcp_replay(trace: &[TraceRecord], section: &LcpSection) -> Result<LcpReport, HarnessError> {
    section.geometry.validate()?;
    if let Some((i, r)) = trace
        .iter()
        .enumerate()
        .find(|(_, r)| r.data.line_size() != section.geometry.line_size)
    {
        return Err(HarnessError::LineSizeMismatch {
            record: i,
            trace: r.data.line_size(),
            config: section.geometry.line_size,
        });
    }
    let mut mem = LcpMemory::new(section.geometry.clone(), section.codec.build(), section.md_entries)?;
    install_first_touch(&mut mem, trace)?;
    for r in trace {
        if r.op.is_write() {
            mem.writeback(r.line_addr(), &r.data)?;
        } else {
            mem.read(r.line_addr())?;
        }
    }
    Ok(lcp_report(&mem))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToggleRow {
    /// 1-based record number.
    pub line: usize,
    pub t0: u64,
    pub t1: u64,
    pub cr: f64,
    pub decision: EcDecision,
}

impl ToggleRow {
    pub const CSV_HEADER: &'static str = "line,t0,t1,cr,decision";

    pub fn to_csv(&self) -> String {
        let d = match self.decision {
            EcDecision::SendCompressed => "compressed",
            EcDecision::SendUncompressed => "uncompressed",
        };
        format!("{},{},{},{:.4},{}", self.line, self.t0, self.t1, self.cr, d)
    }
}

/// EC decision for every record sent back to back over one link.
///
/// `t0` and `t1` are the toggles the raw and compressed payloads would cost
/// after the previously sent payload; the chosen one is then sent.
pub fn toggle_rows(
    trace: &[TraceRecord],
    flit_bytes: usize,
    params: EcParams,
    bu: f64,
    layout: McLayout,
) -> Result<Vec<ToggleRow>, HarnessError> {
    let mut chan = Channel::new(flit_bytes)?;
    let mut rows = Vec::with_capacity(trace.len());
    for (i, r) in trace.iter().enumerate() {
        let raw = r.data.as_bytes();
        let block = compress_line(&r.data);
        let payload = if block.encoding == Encoding::NoCompr {
            raw.to_vec()
        } else {
            mc_transform(&block, layout)
        };
        let inputs = EcInputs {
            t0: chan.cost(raw),
            t1: chan.cost(&payload),
            cr: raw.len() as f64 / block.size_bytes() as f64,
            bu,
        };
        let decision = ec_decide(inputs, params);
        chan.send(if decision == EcDecision::SendCompressed { &payload } else { raw });
        rows.push(ToggleRow {
            line: i + 1,
            t0: inputs.t0,
            t1: inputs.t1,
            cr: inputs.cr,
            decision,
        });
    }
    Ok(rows)
}
