//! Belady's offline policy and the size counterexample.

use std::collections::HashMap;

use crate::cache::{insert_with_eviction, rrip_insert_value, rrip_on_hit, NewBlock, RripConfig, SetState};
use crate::camp::MveSelector;
use crate::compression::Encoding;

/// Resident block whose next use in `future` is furthest away; blocks never
/// used again come first. Ties go to the earlier entry of `resident`.
pub fn belady_victim(future: &[u64], resident: &[u64]) -> Option<u64> {
    let next_use = |b: u64| future.iter().position(|&f| f == b).unwrap_or(usize::MAX);
    let mut best: Option<(usize, u64)> = None;
    for &b in resident {
        let d = next_use(b);
        if best.map_or(true, |(bd, _)| d > bd) {
            best = Some((d, b));
        }
    }
    best.map(|(_, b)| b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HitMiss {
    pub hits: u32,
    pub misses: u32,
}

/// Size-oblivious Belady over a byte-budgeted cache.
///
/// `warm` is the initial contents as `(block, bytes)`; each access of `seq`
/// that misses evicts Belady victims until the block fits. Hits and misses
/// are counted from access `count_from` on.
pub fn belady_sized(budget: usize, warm: &[(u64, usize)], seq: &[(u64, usize)], count_from: usize) -> HitMiss {
    let mut resident: Vec<(u64, usize)> = warm.to_vec();
    let mut hm = HitMiss { hits: 0, misses: 0 };
    for (t, &(b, size)) in seq.iter().enumerate() {
        let hit = resident.iter().any(|r| r.0 == b);
        if t >= count_from {
            if hit {
                hm.hits += 1;
            } else {
                hm.misses += 1;
            }
        }
        if hit {
            continue;
        }
        let future: Vec<u64> = seq[t + 1..].iter().map(|s| s.0).collect();
        while resident.iter().map(|r| r.1).sum::<usize>() + size > budget {
            let ids: Vec<u64> = resident.iter().map(|r| r.0).collect();
            let v = belady_victim(&future, &ids).expect("budget holds the block");
            resident.retain(|r| r.0 != v);
        }
        resident.push((b, size));
    }
    hm
}

/// The same scenario on a compressed cache set evicting by MVE.
///
/// Warm blocks are inserted in order at the default insertion RRPV.
pub fn mve_sized(budget: usize, warm: &[(u64, usize)], seq: &[(u64, usize)], count_from: usize) -> HitMiss {
    const SEGMENT: usize = 8;
    let rrip = RripConfig::default();
    let mut set = SetState::new(warm.len() + seq.len(), budget / SEGMENT);
    let mut selector = MveSelector { cfg: rrip };
    let mut now = 0;
    let block = |tag: u64, size: usize, now: u64| NewBlock {
        tag,
        encoding: if size == 64 { Encoding::NoCompr } else { Encoding::Base8Delta4 },
        size_bytes: size as u16,
        size_segments: size.div_ceil(SEGMENT) as u16,
        rrpv: rrip_insert_value(rrip, false),
        lru_stamp: now,
        dirty: false,
    };
    for &(b, size) in warm {
        now += 1;
        insert_with_eviction(&mut set, &block(b, size, now), &mut selector).expect("warm state fits");
    }
    let mut hm = HitMiss { hits: 0, misses: 0 };
    for (t, &(b, size)) in seq.iter().enumerate() {
        now += 1;
        let hit = set.lookup(b);
        if t >= count_from {
            if hit.is_some() {
                hm.hits += 1;
            } else {
                hm.misses += 1;
            }
        }
        match hit {
            Some(i) => rrip_on_hit(&mut set.tags_mut()[i]),
            None => {
                insert_with_eviction(&mut set, &block(b, size, now), &mut selector).expect("block fits");
            }
        }
    }
    hm
}

/// Block names of the scripted scenario.
pub const A: u64 = 0xA;
pub const B: u64 = 0xB;
pub const C: u64 = 0xC;
pub const X: u64 = 0x10;
pub const Y: u64 = 0x11;

/// 160B cache warm with A, B, C (32B each) and Y (64B), then X, A, Y, B, C.
/// Returns the results over the four accesses after X as (MVE, Belady).
pub fn size_counterexample() -> (HitMiss, HitMiss) {
    let sizes: HashMap<u64, usize> = [(A, 32), (B, 32), (C, 32), (X, 64), (Y, 64)].into();
    let warm: Vec<_> = [A, B, C, Y].iter().map(|b| (*b, sizes[b])).collect();
    let seq: Vec<_> = [X, A, Y, B, C].iter().map(|b| (*b, sizes[b])).collect();
    (mve_sized(160, &warm, &seq, 1), belady_sized(160, &warm, &seq, 1))
}
