//! Bit-toggle accounting for compressed transfers.
//!
//! On-chip links toggle a wire whenever consecutive flits differ in that bit;
//! DRAM buses are charged per zero bit. Energy Control picks, per line,
//! whether sending it compressed is worth the extra toggles. Metadata
//! Consolidation keeps compressed fields byte-aligned so they toggle less.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compression::{CompressedBlock, Encoding};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ToggleError {
    #[error("flit width {got} bytes does not match {expected}")]
    Width { expected: usize, got: usize },
    #[error("flit width must be positive")]
    ZeroWidth,
}

/// A payload cut into fixed-width flits, the last one zero-padded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlitStream {
    flit_bytes: usize,
    flits: Vec<Vec<u8>>,
}

impl FlitStream {
    pub fn new(payload: &[u8], flit_bytes: usize) -> Result<Self, ToggleError> {
        if flit_bytes == 0 {
            return Err(ToggleError::ZeroWidth);
        }
        let flits = payload
            .chunks(flit_bytes)
            .map(|c| {
                let mut f = c.to_vec();
                f.resize(flit_bytes, 0);
                f
            })
            .collect();
        Ok(Self { flit_bytes, flits })
    }

    pub fn flit_bits(&self) -> usize {
        self.flit_bytes * 8
    }

    pub fn flits(&self) -> &[Vec<u8>] {
        &self.flits
    }

    pub fn last(&self) -> Option<&[u8]> {
        self.flits.last().map(Vec::as_slice)
    }
}

fn hamming(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as u64).sum()
}

/// `Σ popcount(flit_j XOR flit_{j-1})`, starting from `prev`.
pub fn toggle_count_onchip(stream: &FlitStream, prev: &[u8]) -> Result<u64, ToggleError> {
    if prev.len() != stream.flit_bytes {
        return Err(ToggleError::Width {
            expected: stream.flit_bytes,
            got: prev.len(),
        });
    }
    let mut last = prev;
    let mut total = 0;
    for f in &stream.flits {
        total += hamming(last, f);
        last = f;
    }
    Ok(total)
}

/// Zero bits in the payload.
pub fn toggle_count_dram(payload: &[u8]) -> u64 {
    payload.iter().map(|b| b.count_zeros() as u64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EcMetric {
    Ed,
    Ed2,
}

impl std::str::FromStr for EcMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ed" => Ok(EcMetric::Ed),
            "ed2" => Ok(EcMetric::Ed2),
            _ => Err(format!("unknown metric {s:?} (expected ed or ed2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcInputs {
    /// Toggles to send the line uncompressed.
    pub t0: u64,
    /// Toggles to send it compressed.
    pub t1: u64,
    /// Uncompressed over compressed size.
    pub cr: f64,
    /// Bandwidth utilization in `[0, 1]`.
    pub bu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcParams {
    pub metric: EcMetric,
    pub bu_threshold: f64,
    /// Exponent on the toggle ratio relative to the metric's own power.
    pub energy_weight: f64,
}

impl Default for EcParams {
    fn default() -> Self {
        Self {
            metric: EcMetric::Ed,
            bu_threshold: 0.5,
            energy_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EcDecision {
    SendCompressed,
    SendUncompressed,
}

/// `A = CR × (BU > threshold ? 1/(1-BU) : 1)`, `B = T0 / T1`; compress when
/// `A·B > 1` (ED) or `A·B² > 1` (ED2). Zero compressed toggles always compress.
pub fn ec_decide(inputs: EcInputs, params: EcParams) -> EcDecision {
    if inputs.t1 == 0 {
        return EcDecision::SendCompressed;
    }
    let a = inputs.cr * if inputs.bu > params.bu_threshold { 1.0 / (1.0 - inputs.bu) } else { 1.0 };
    let b = inputs.t0 as f64 / inputs.t1 as f64;
    let power = match params.metric {
        EcMetric::Ed => 1.0,
        EcMetric::Ed2 => 2.0,
    } * params.energy_weight;
    if a * b.powf(power) > 1.0 {
        EcDecision::SendCompressed
    } else {
        EcDecision::SendUncompressed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McLayout {
    /// Per-element mask bit immediately before each delta, bit-packed.
    Scattered,
    /// Encoding and mask first in whole bytes, then base and deltas.
    Consolidated,
}

struct BitWriter {
    out: Vec<u8>,
    bits: usize,
}

impl BitWriter {
    fn new() -> Self {
        Self { out: Vec::new(), bits: 0 }
    }

    fn put(&mut self, value: u64, width: usize) {
        for b in 0..width {
            if self.bits % 8 == 0 {
                self.out.push(0);
            }
            if value >> b & 1 == 1 {
                *self.out.last_mut().unwrap() |= 1 << (self.bits % 8);
            }
            self.bits += 1;
        }
    }
}

/// Serializes a compressed block for transfer.
///
/// Zeros is one metadata byte; RepValues and NoCompr are a code byte plus
/// their payload and look the same in both layouts.
pub fn mc_transform(block: &CompressedBlock, layout: McLayout) -> Vec<u8> {
    let code = block.encoding.code();
    match block.encoding {
        Encoding::Zeros => vec![code],
        Encoding::RepValues => {
            let mut v = vec![code];
            v.extend_from_slice(&block.base.to_le_bytes());
            v
        }
        Encoding::NoCompr => {
            let mut v = vec![code];
            v.extend_from_slice(&block.raw);
            v
        }
        enc => {
            let k = enc.base_width().unwrap();
            let d = enc.delta_width().unwrap();
            let n = block.element_count();
            match layout {
                McLayout::Scattered => {
                    let mut w = BitWriter::new();
                    w.put(code as u64, 4);
                    w.put(block.base, 8 * k);
                    for (i, &delta) in block.deltas.iter().enumerate() {
                        w.put(block.zero_base_mask >> i & 1, 1);
                        w.put(delta as u64, 8 * d);
                    }
                    w.out
                }
                McLayout::Consolidated => {
                    let mut v = vec![code];
                    v.extend_from_slice(&block.zero_base_mask.to_le_bytes()[..n.div_ceil(8)]);
                    v.extend_from_slice(&block.base.to_le_bytes()[..k]);
                    for &delta in &block.deltas {
                        v.extend_from_slice(&delta.to_le_bytes()[..d]);
                    }
                    v
                }
            }
        }
    }
}

/// A link that remembers its last flit across transfers.
#[derive(Debug, Clone)]
pub struct Channel {
    flit_bytes: usize,
    last: Vec<u8>,
    toggles: u64,
    dram_toggles: u64,
    flits: u64,
}

impl Channel {
    pub fn new(flit_bytes: usize) -> Result<Self, ToggleError> {
        if flit_bytes == 0 {
            return Err(ToggleError::ZeroWidth);
        }
        Ok(Self {
            flit_bytes,
            last: vec![0; flit_bytes],
            toggles: 0,
            dram_toggles: 0,
            flits: 0,
        })
    }

    pub fn flit_bytes(&self) -> usize {
        self.flit_bytes
    }

    /// On-chip toggles `payload` would cost now, without sending it.
    pub fn cost(&self, payload: &[u8]) -> u64 {
        let stream = FlitStream::new(payload, self.flit_bytes).expect("width checked");
        toggle_count_onchip(&stream, &self.last).expect("same width")
    }

    /// Sends `payload`, returning its on-chip toggles.
    pub fn send(&mut self, payload: &[u8]) -> u64 {
        let stream = FlitStream::new(payload, self.flit_bytes).expect("width checked");
        let t = toggle_count_onchip(&stream, &self.last).expect("same width");
        if let Some(last) = stream.last() {
            self.last = last.to_vec();
        }
        self.toggles += t;
        self.flits += stream.flits().len() as u64;
        self.dram_toggles += stream.flits().iter().map(|f| toggle_count_dram(f)).sum::<u64>();
        t
    }

    pub fn toggles(&self) -> u64 {
        self.toggles
    }

    /// Zero bits sent, padding included.
    pub fn dram_toggles(&self) -> u64 {
        self.dram_toggles
    }

    pub fn flits(&self) -> u64 {
        self.flits
    }
}
