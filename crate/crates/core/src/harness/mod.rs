//! Traces, synthetic workloads, the simulation driver and its reports.

mod belady;
mod config;
mod reuse;
mod sim;
mod sweep;
mod synth;
mod tools;
mod trace;

use thiserror::Error;

pub use belady::{belady_sized, belady_victim, mve_sized, size_counterexample, HitMiss};
pub use config::{CodecKind, LcpSection, PageCodecKind, Policy, PolicySpec, SimConfig, ToggleSection};
pub use reuse::{reuse_distances, ReuseDistance};
pub use sim::{
    effective_compression_ratio, run_simulation, size_hist_bin, LcpReport, ReuseBySize, RunReport, SipSummary,
    ToggleReport, VwaySummary, CSV_VERSION, HIST_BINS, REPORT_SCHEMA_VERSION,
};
pub use sweep::{run_sweep, write_report_files};
pub use synth::{encodings_with_segments, gen_synthetic, line_with_encoding, StreamSpec, SynthKind, SynthParams};
pub use tools::{lcp_replay, toggle_rows, trace_stats, ToggleRow, TraceStats};
pub use trace::{
    format_text_line, parse_text_line, parse_trace, write_binary, write_text, write_trace, BinaryTraceReader, Op,
    TextTraceReader, TraceFormat, TraceRecord, BINARY_MAGIC,
};

use crate::cache::CacheError;
use crate::lcp::LcpError;
use crate::toggles::ToggleError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("binary trace lacks the CMS1 header")]
    BadMagic,
    #[error("binary trace truncated in record {record}")]
    Truncated { record: usize },
    #[error("record {record}: {msg}")]
    Record { record: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("record {record} has {trace}-byte lines, config expects {config}")]
    LineSizeMismatch { record: usize, trace: usize, config: usize },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Lcp(#[from] LcpError),
    #[error(transparent)]
    Toggle(#[from] ToggleError),
    #[error("simulation invariant: {0}")]
    Invariant(String),
}
