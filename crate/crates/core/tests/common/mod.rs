//! Reference models and workloads shared by the integration tests.
#![allow(dead_code)]

use campsim::cache::{CacheGeometry, LocalPolicy};
use campsim::camp::SipConfig;
use campsim::compression::golden::{parse_golden, GoldenVector};
use campsim::harness::{gen_synthetic, Policy, SimConfig, StreamSpec, SynthKind, SynthParams, TraceRecord};
use campsim::vway::VwayConfig;

pub const GOLDEN: &str = include_str!("../data/bdi_golden.txt");

pub fn golden() -> Vec<GoldenVector> {
    parse_golden(GOLDEN).expect("golden file parses")
}

fn sign_fits(v: i128, bytes: usize) -> bool {
    let lim = 1i128 << (8 * bytes - 1);
    -lim <= v && v < lim
}

fn elems(bytes: &[u8], k: usize) -> Vec<i128> {
    bytes
        .chunks(k)
        .map(|c| {
            let mut u = 0u128;
            for (i, &b) in c.iter().enumerate() {
                u |= (b as u128) << (8 * i);
            }
            // two's complement at width k
            if u >> (8 * k - 1) & 1 == 1 {
                u as i128 - (1i128 << (8 * k))
            } else {
                u as i128
            }
        })
        .collect()
}

/// Whether `k`/`d` base+delta applies: every element is within `d` bytes
/// of zero or of the first element that is not.
pub fn unit_applies(bytes: &[u8], k: usize, d: usize) -> bool {
    let e = elems(bytes, k);
    let base = e.iter().copied().find(|&v| !sign_fits(v, d));
    let wrap = 1i128 << (8 * k);
    e.iter().all(|&v| {
        if sign_fits(v, d) {
            return true;
        }
        let b = base.unwrap();
        // difference modulo 2^(8k), read back as signed
        let mut diff = (v - b).rem_euclid(wrap);
        if diff >= wrap / 2 {
            diff -= wrap;
        }
        sign_fits(diff, d)
    })
}

/// Smallest encoded size over every applicable encoding, tried one by one.
pub fn oracle_size(bytes: &[u8]) -> usize {
    let n = bytes.len();
    if bytes.iter().all(|&b| b == 0) {
        return 1;
    }
    if bytes.chunks(8).all(|c| c == &bytes[..8]) {
        return 8;
    }
    let mut best = n;
    for (k, d) in [(8, 1), (8, 2), (8, 4), (4, 1), (4, 2), (2, 1)] {
        if unit_applies(bytes, k, d) {
            best = best.min(k + n / k * d);
        }
    }
    best
}

/// Set-associative LRU over line addresses.
pub struct TextbookLru {
    sets: Vec<Vec<u64>>,
    ways: usize,
    line: u64,
}

impl TextbookLru {
    pub fn new(g: &CacheGeometry) -> Self {
        let n = g.capacity_bytes / g.line_size / g.assoc;
        Self { sets: vec![Vec::new(); n], ways: g.assoc, line: g.line_size as u64 }
    }

    /// True on hit.
    pub fn access(&mut self, addr: u64) -> bool {
        let l = addr / self.line;
        let n = self.sets.len() as u64;
        let set = &mut self.sets[(l % n) as usize];
        let tag = l / n;
        if let Some(p) = set.iter().position(|&t| t == tag) {
            set.remove(p);
            set.push(tag);
            return true;
        }
        if set.len() == self.ways {
            set.remove(0);
        }
        set.push(tag);
        false
    }
}

/// 3-bit SRRIP with hit promotion to 0 and insertion at 6.
pub struct TextbookSrrip {
    sets: Vec<Vec<Option<(u64, u8)>>>,
    line: u64,
}

impl TextbookSrrip {
    pub fn new(g: &CacheGeometry) -> Self {
        let n = g.capacity_bytes / g.line_size / g.assoc;
        Self { sets: vec![vec![None; g.assoc]; n], line: g.line_size as u64 }
    }

    pub fn access(&mut self, addr: u64) -> bool {
        let l = addr / self.line;
        let n = self.sets.len() as u64;
        let set = &mut self.sets[(l % n) as usize];
        let tag = l / n;
        for w in set.iter_mut().flatten() {
            if w.0 == tag {
                w.1 = 0;
                return true;
            }
        }
        if let Some(w) = set.iter_mut().find(|w| w.is_none()) {
            *w = Some((tag, 6));
            return false;
        }
        loop {
            if let Some(w) = set.iter_mut().find(|w| w.unwrap().1 == 7) {
                *w = Some((tag, 6));
                return false;
            }
            for w in set.iter_mut().flatten() {
                w.1 += 1;
            }
        }
    }
}

pub fn sized_trace(streams: &[(usize, usize, u32)], accesses: usize, seed: u64) -> Vec<TraceRecord> {
    let params = SynthParams {
        accesses,
        streams: streams
            .iter()
            .map(|&(segments, reuse_distance, weight)| StreamSpec { segments, reuse_distance, weight })
            .collect(),
        ..SynthParams::default()
    };
    gen_synthetic(SynthKind::SizeReuseCorrelated, &params, seed).unwrap()
}

/// Tiny blocks reused often next to full-size blocks that never come back.
pub fn small_reuse_trace(accesses: usize) -> Vec<TraceRecord> {
    sized_trace(&[(1, 639, 1), (8, 100_000, 4)], accesses, 11)
}

/// Full-size blocks reused at short distance next to a stream of 40-byte
/// blocks that never come back: ranking by size evicts the wrong ones.
pub fn big_reuse_trace(accesses: usize) -> Vec<TraceRecord> {
    sized_trace(&[(5, 100_000, 1), (8, 300, 1)], accesses, 11)
}

pub const TRAIN_PERIOD: u64 = 100_000;

pub fn learning_geometry() -> CacheGeometry {
    CacheGeometry::new(64 * 1024, 64, 16)
}

pub fn learning_sip() -> SipConfig {
    SipConfig { m_sets_per_bin: 4, train_period_accesses: TRAIN_PERIOD, ..SipConfig::default() }
}

pub fn learning_vway() -> VwayConfig {
    VwayConfig { train_period_accesses: TRAIN_PERIOD, ..VwayConfig::default() }
}

pub fn learning_config(policy: Policy) -> SimConfig {
    let mut c = SimConfig::new(learning_geometry(), policy);
    c.sip = learning_sip();
    c.vway = learning_vway();
    c
}

pub fn local(p: LocalPolicy) -> Policy {
    Policy::Local(p)
}
