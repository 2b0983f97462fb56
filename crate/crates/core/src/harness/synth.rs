//! Deterministic synthetic workloads.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trace::{Op, TraceRecord};
use super::HarnessError;
use crate::compression::{compress_line, CacheLineData, Encoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// 8-byte elements below 128.
    Narrow,
    /// 8-byte pointers into one heap region, some null.
    Pointer,
    Zero,
    /// A streamed int array, a small hot array of doubles and a strided
    /// mostly-zero matrix.
    MixedStruct,
    /// Streams whose compressed size and reuse distance are both chosen.
    SizeReuseCorrelated,
}

impl std::str::FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "narrow" => Ok(SynthKind::Narrow),
            "pointer" => Ok(SynthKind::Pointer),
            "zero" => Ok(SynthKind::Zero),
            "mixed_struct" => Ok(SynthKind::MixedStruct),
            "size_reuse_correlated" => Ok(SynthKind::SizeReuseCorrelated),
            _ => Err(format!("unknown workload kind {s:?}")),
        }
    }
}

/// One stream of [`SynthKind::SizeReuseCorrelated`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    /// Compressed size of every line, in 8-byte segments.
    pub segments: usize,
    /// Distinct addresses of this stream between two uses of one line; the
    /// stream cycles over `reuse_distance + 1` lines.
    pub reuse_distance: usize,
    /// Relative share of the accesses.
    #[serde(default = "one")]
    pub weight: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub accesses: usize,
    pub line_size: usize,
    /// Distinct lines touched by the single-region kinds.
    pub footprint_lines: usize,
    pub write_fraction: f64,
    pub instructions_per_access: u64,
    pub base_addr: u64,
    pub streams: Vec<StreamSpec>,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            accesses: 100_000,
            line_size: 64,
            footprint_lines: 4096,
            write_fraction: 0.0,
            instructions_per_access: 1,
            base_addr: 0x1000_0000,
            streams: vec![
                StreamSpec {
                    segments: 1,
                    reuse_distance: 10,
                    weight: 1,
                },
                StreamSpec {
                    segments: 8,
                    reuse_distance: 100_000,
                    weight: 1,
                },
            ],
        }
    }
}

impl SynthParams {
    fn validate(&self, kind: SynthKind) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !CacheLineData::SUPPORTED_SIZES.contains(&self.line_size) {
            return bad(format!("line_size {} unsupported", self.line_size));
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return bad("write_fraction must lie in [0, 1]".into());
        }
        if self.instructions_per_access == 0 {
            return bad("instructions_per_access must be positive".into());
        }
        if self.base_addr % self.line_size as u64 != 0 {
            return bad("base_addr must be line aligned".into());
        }
        if kind == SynthKind::SizeReuseCorrelated {
            if self.streams.is_empty() || self.streams.iter().all(|s| s.weight == 0) {
                return bad("size_reuse_correlated needs at least one weighted stream".into());
            }
            for s in &self.streams {
                if encodings_with_segments(s.segments, self.line_size).is_empty() {
                    return bad(format!("no encoding compresses a {}B line to {} segments", self.line_size, s.segments));
                }
            }
        } else if self.footprint_lines == 0 {
            return bad("footprint_lines must be positive".into());
        }
        Ok(())
    }
}

const SEGMENT: usize = 8;

/// Encodings whose compressed size spans exactly `segments` segments.
pub fn encodings_with_segments(segments: usize, line_size: usize) -> Vec<Encoding> {
    Encoding::ALL
        .into_iter()
        .filter(|e| e.compressed_size(line_size).div_ceil(SEGMENT).max(1) == segments)
        .collect()
}

fn width_mask(bytes: usize) -> u64 {
    if bytes >= 8 {
        u64::MAX
    } else {
        (1u64 << (8 * bytes)) - 1
    }
}

fn pack(values: &[u64], k: usize) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()[..k].to_vec()).collect()
}

fn attempt(enc: Encoding, line_size: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    match enc {
        Encoding::Zeros => vec![0; line_size],
        Encoding::RepValues => {
            let v: u64 = rng.gen::<u64>() | 1 << 62;
            pack(&vec![v; line_size / 8], 8)
        }
        Encoding::NoCompr => (0..line_size).map(|_| rng.gen()).collect(),
        _ => {
            let (k, d) = (enc.base_width().unwrap(), enc.delta_width().unwrap());
            let mask = width_mask(k);
            // far from zero so the implicit zero base does not apply
            let base = (rng.gen::<u64>() & mask & !(1 << (8 * k - 1))) | 1 << (8 * k - 2);
            let lim = 1i64 << (8 * d - 1);
            let floor = if d > 1 { 1i64 << (8 * (d - 1) - 1) } else { 0 };
            let n = line_size / k;
            let wide = rng.gen_range(1..n);
            let values: Vec<u64> = (0..n)
                .map(|i| {
                    let delta = if i == 0 {
                        0
                    } else if i == wide {
                        let m = rng.gen_range(floor..lim);
                        if rng.gen() { m } else { -m }
                    } else {
                        rng.gen_range(-lim..lim)
                    };
                    base.wrapping_add(delta as u64) & mask
                })
                .collect();
            pack(&values, k)
        }
    }
}

/// A random line whose best encoding is `enc`.
pub fn line_with_encoding(enc: Encoding, line_size: usize, rng: &mut ChaCha8Rng) -> CacheLineData {
    loop {
        let line = CacheLineData::new(attempt(enc, line_size, rng)).expect("supported line size");
        if compress_line(&line).encoding == enc {
            return line;
        }
    }
}

fn narrow_line(line_size: usize, rng: &mut ChaCha8Rng) -> CacheLineData {
    let words: Vec<u64> = (0..line_size / 8).map(|_| rng.gen_range(0..128)).collect();
    CacheLineData::from_u64s(&words).unwrap()
}

fn pointer_line(line_size: usize, rng: &mut ChaCha8Rng) -> CacheLineData {
    const HEAP: u64 = 0x7f3a_0000_0000;
    let words: Vec<u64> = (0..line_size / 8)
        .map(|_| {
            if rng.gen_bool(0.1) {
                0
            } else {
                HEAP + (rng.gen_range(0..1u64 << 12) << 3)
            }
        })
        .collect();
    CacheLineData::from_u64s(&words).unwrap()
}

fn narrow_u32_line(line_size: usize, rng: &mut ChaCha8Rng) -> CacheLineData {
    let words: Vec<u32> = (0..line_size / 4).map(|_| rng.gen_range(0..100)).collect();
    CacheLineData::from_u32s(&words).unwrap()
}

fn sparse_line(line_size: usize, rng: &mut ChaCha8Rng) -> CacheLineData {
    if rng.gen_bool(0.7) {
        CacheLineData::zeroed(line_size).unwrap()
    } else {
        narrow_line(line_size, rng)
    }
}

fn random_line(line_size: usize, rng: &mut ChaCha8Rng) -> CacheLineData {
    line_with_encoding(Encoding::NoCompr, line_size, rng)
}

type LineGen = fn(usize, &mut ChaCha8Rng) -> CacheLineData;

/// Keeps per-line contents stable across reads and regenerates them on writes.
struct Memory {
    rng: ChaCha8Rng,
    lines: HashMap<u64, CacheLineData>,
    line_size: usize,
    write_fraction: f64,
}

impl Memory {
    fn access(&mut self, addr: u64, gen: &dyn Fn(&mut ChaCha8Rng) -> CacheLineData) -> (Op, CacheLineData) {
        let write = self.write_fraction > 0.0 && self.rng.gen_bool(self.write_fraction);
        let data = match (self.lines.get(&addr), write) {
            (Some(d), false) => d.clone(),
            _ => gen(&mut self.rng),
        };
        debug_assert_eq!(data.line_size(), self.line_size);
        self.lines.insert(addr, data.clone());
        (if write { Op::Write } else { Op::Read }, data)
    }
}

/// Generates `params.accesses` records; the same `(kind, params, seed)`
/// always yields the same trace.
pub fn gen_synthetic(kind: SynthKind, params: &SynthParams, seed: u64) -> Result<Vec<TraceRecord>, HarnessError> {
    params.validate(kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mem = Memory {
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
        lines: HashMap::new(),
        line_size: params.line_size,
        write_fraction: params.write_fraction,
    };
    let line = params.line_size as u64;
    let ls = params.line_size;
    let addr_of = |region: u64, i: u64| params.base_addr + (region << 32) + i * line;
    let mut out = Vec::with_capacity(params.accesses);

    let footprint = params.footprint_lines as u64;
    let half = (footprint / 2).max(1);
    let cols = (half as f64).sqrt().ceil().max(1.0) as u64;
    let streams = &params.streams;
    let total_weight: u32 = streams.iter().map(|s| s.weight).sum();
    let mut cursor = vec![0u64; streams.len()];
    let stream_gens: Vec<Vec<Encoding>> = streams
        .iter()
        .map(|s| encodings_with_segments(s.segments, ls))
        .collect();

    for n in 0..params.accesses as u64 {
        let (addr, gen): (u64, Box<dyn Fn(&mut ChaCha8Rng) -> CacheLineData>) = match kind {
            SynthKind::Narrow | SynthKind::Pointer | SynthKind::Zero => {
                let g: LineGen = match kind {
                    SynthKind::Narrow => narrow_line,
                    SynthKind::Pointer => pointer_line,
                    _ => |ls, _| CacheLineData::zeroed(ls).unwrap(),
                };
                (addr_of(0, rng.gen_range(0..footprint)), Box::new(move |r| g(ls, r)))
            }
            SynthKind::MixedStruct => {
                let i = n / 3;
                match n % 3 {
                    0 => (addr_of(0, i % half), Box::new(move |r| narrow_u32_line(ls, r))),
                    1 => (addr_of(1, i % 2), Box::new(move |r| random_line(ls, r))),
                    _ => {
                        // column-major walk over a row-major matrix
                        let (row, col) = (i % cols, (i / cols) % cols);
                        (addr_of(2, (row * cols + col) % half), Box::new(move |r| sparse_line(ls, r)))
                    }
                }
            }
            SynthKind::SizeReuseCorrelated => {
                let mut pick = rng.gen_range(0..total_weight);
                let s = streams
                    .iter()
                    .position(|st| {
                        if pick < st.weight {
                            true
                        } else {
                            pick -= st.weight;
                            false
                        }
                    })
                    .unwrap();
                let cycle = streams[s].reuse_distance as u64 + 1;
                let i = cursor[s] % cycle;
                cursor[s] += 1;
                let encs = stream_gens[s].clone();
                (
                    addr_of(s as u64 + 1, i),
                    Box::new(move |r| {
                        let e = encs[r.gen_range(0..encs.len())];
                        line_with_encoding(e, ls, r)
                    }),
                )
            }
        };
        let (op, data) = mem.access(addr, gen.as_ref());
        out.push(TraceRecord {
            icount: (n + 1) * params.instructions_per_access,
            op,
            addr,
            data,
        });
    }
    Ok(out)
}
