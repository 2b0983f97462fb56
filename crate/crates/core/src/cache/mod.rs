//! Compressed set-associative cache.
//!
//! Each set has `tag_factor × assoc` tags sharing a data store of
//! `assoc × line_size` bytes split into fixed-size segments. A compressed block
//! occupies `ceil(size / segment_bytes)` segments; inserting a block evicts as
//! many residents as the replacement policy needs to make it fit.

mod policy;
mod set;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camp::{MveSelector, SipConfig, SipController};
use crate::compression::Encoding;

pub use policy::{
    lru_select_victim, rrip_insert_value, rrip_on_hit, rrip_select_victim, LruSelector,
    RripConfig, RripSelector,
};
pub(crate) use policy::rrip_age;
pub use set::{
    insert_with_eviction, write_update, Demand, InsertOutcome, NewBlock, SetState, TagEntry,
    VictimSelector, WriteOutcome,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("invalid cache configuration: {0}")]
    Config(String),
    #[error("block of {segments} segments cannot fit a {budget}-segment budget")]
    BlockTooLarge { segments: usize, budget: usize },
    #[error("replacement policy found no victim")]
    NoVictim,
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheGeometry {
    pub capacity_bytes: usize,
    pub line_size: usize,
    /// Data ways per set.
    pub assoc: usize,
    #[serde(default = "default_tag_factor")]
    pub tag_factor: usize,
    #[serde(default = "default_segment_bytes")]
    pub segment_bytes: usize,
}

fn default_tag_factor() -> usize {
    2
}

fn default_segment_bytes() -> usize {
    8
}

impl CacheGeometry {
    pub fn new(capacity_bytes: usize, line_size: usize, assoc: usize) -> Self {
        Self {
            capacity_bytes,
            line_size,
            assoc,
            tag_factor: 2,
            segment_bytes: 8,
        }
    }

    pub fn validate(&self) -> Result<(), CacheError> {
        let bad = |msg: String| Err(CacheError::Config(msg));
        if self.line_size == 0 || self.assoc == 0 || self.segment_bytes == 0 {
            return bad("line size, associativity and segment size must be non-zero".into());
        }
        if self.capacity_bytes == 0 || self.capacity_bytes % (self.line_size * self.assoc) != 0 {
            return bad(format!(
                "capacity {} not divisible by line_size × assoc = {}",
                self.capacity_bytes,
                self.line_size * self.assoc
            ));
        }
        if self.tag_factor < 1 {
            return bad("tag_factor must be at least 1".into());
        }
        if self.line_size % self.segment_bytes != 0 {
            return bad(format!(
                "line size {} not divisible by segment size {}",
                self.line_size, self.segment_bytes
            ));
        }
        Ok(())
    }

    pub fn num_sets(&self) -> usize {
        self.capacity_bytes / (self.line_size * self.assoc)
    }

    pub fn tag_slots(&self) -> usize {
        self.tag_factor * self.assoc
    }

    pub fn budget_segments(&self) -> usize {
        self.assoc * self.line_size / self.segment_bytes
    }

    pub fn segments_for(&self, size_bytes: usize) -> usize {
        size_bytes.div_ceil(self.segment_bytes).max(1)
    }

    /// Set index and tag of a byte address.
    pub fn locate(&self, addr: u64) -> (usize, u64) {
        let line = addr / self.line_size as u64;
        let sets = self.num_sets() as u64;
        ((line % sets) as usize, line / sets)
    }

    /// Inverse of [`CacheGeometry::locate`], line-aligned.
    pub fn line_addr(&self, set: usize, tag: u64) -> u64 {
        (tag * self.num_sets() as u64 + set as u64) * self.line_size as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalPolicy {
    Lru,
    Rrip,
    Mve,
    Sip,
    Camp,
}

impl LocalPolicy {
    pub const ALL: [LocalPolicy; 5] = [
        LocalPolicy::Lru,
        LocalPolicy::Rrip,
        LocalPolicy::Mve,
        LocalPolicy::Sip,
        LocalPolicy::Camp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LocalPolicy::Lru => "lru",
            LocalPolicy::Rrip => "rrip",
            LocalPolicy::Mve => "mve",
            LocalPolicy::Sip => "sip",
            LocalPolicy::Camp => "camp",
        }
    }

    pub fn uses_sip(self) -> bool {
        matches!(self, LocalPolicy::Sip | LocalPolicy::Camp)
    }

    pub fn uses_mve(self) -> bool {
        matches!(self, LocalPolicy::Mve | LocalPolicy::Camp)
    }
}

impl fmt::Display for LocalPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LocalPolicy {
    type Err = CacheError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LocalPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CacheError::Config(format!("unknown policy {s:?}")))
    }
}

/// The victim selector matching a policy's eviction half.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Selector {
    Lru(LruSelector),
    Rrip(RripSelector),
    Mve(MveSelector),
}

impl Selector {
    pub(crate) fn for_policy(policy: LocalPolicy, cfg: RripConfig) -> Self {
        match policy {
            LocalPolicy::Lru => Selector::Lru(LruSelector),
            LocalPolicy::Rrip | LocalPolicy::Sip => Selector::Rrip(RripSelector { cfg }),
            LocalPolicy::Mve | LocalPolicy::Camp => Selector::Mve(MveSelector { cfg }),
        }
    }
}

impl VictimSelector for Selector {
    fn select(&mut self, set: &mut SetState, demand: &Demand) -> Vec<usize> {
        match self {
            Selector::Lru(s) => s.select(set, demand),
            Selector::Rrip(s) => s.select(set, demand),
            Selector::Mve(s) => s.select(set, demand),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Eviction {
    pub addr: u64,
    pub dirty: bool,
    pub encoding: Encoding,
    pub size_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessOutcome {
    pub hit: bool,
    pub set: usize,
    /// Whether the (re)placed block went in with high insertion priority.
    pub prioritized: bool,
    pub evicted: Vec<Eviction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SnapshotEntry {
    pub tag: u64,
    pub encoding: Encoding,
    pub size_bytes: usize,
    pub rrpv: u8,
}

/// Per-set resident blocks, for debugging and golden tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CacheSnapshot {
    pub sets: Vec<Vec<SnapshotEntry>>,
}

/// A compressed cache driven one access at a time.
#[derive(Debug, Clone)]
pub struct CompressedCache {
    geometry: CacheGeometry,
    policy: LocalPolicy,
    rrip: RripConfig,
    mve: bool,
    sets: Vec<SetState>,
    clock: u64,
    sip: Option<SipController>,
    resident_blocks: usize,
    resident_bytes: usize,
    used_segments: usize,
}

impl CompressedCache {
    pub fn new(
        geometry: CacheGeometry,
        policy: LocalPolicy,
        rrip: RripConfig,
        sip: SipConfig,
    ) -> Result<Self, CacheError> {
        geometry.validate()?;
        let sets = vec![SetState::new(geometry.tag_slots(), geometry.budget_segments()); geometry.num_sets()];
        let sip = if policy.uses_sip() && sip.enabled {
            Some(SipController::new(sip, &geometry, policy, rrip)?)
        } else {
            None
        };
        Ok(Self {
            geometry,
            policy,
            rrip,
            mve: policy.uses_mve(),
            sets,
            clock: 0,
            sip,
            resident_blocks: 0,
            resident_bytes: 0,
            used_segments: 0,
        })
    }

    /// Replaces MVE eviction with SRRIP, leaving insertion alone.
    pub fn without_mve(mut self) -> Result<Self, CacheError> {
        self.mve = false;
        if let Some(sip) = &self.sip {
            let cfg = *sip.config();
            self.sip = Some(SipController::new(cfg, &self.geometry, LocalPolicy::Sip, self.rrip)?);
        }
        Ok(self)
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geometry
    }

    pub fn policy(&self) -> LocalPolicy {
        self.policy
    }

    pub fn sets(&self) -> &[SetState] {
        &self.sets
    }

    pub fn sip(&self) -> Option<&SipController> {
        self.sip.as_ref()
    }

    pub fn resident_blocks(&self) -> usize {
        self.resident_blocks
    }

    /// Uncompressed bytes of every resident block.
    pub fn resident_bytes(&self) -> usize {
        self.resident_bytes
    }

    pub fn used_segments(&self) -> usize {
        self.used_segments
    }

    /// Looks up and updates the cache for one access.
    ///
    /// `encoding` and `size_bytes` describe the line's current compressed
    /// form; on a write hit the resident copy is resized to it.
    pub fn access(
        &mut self,
        addr: u64,
        is_write: bool,
        encoding: Encoding,
        size_bytes: usize,
    ) -> Result<AccessOutcome, CacheError> {
        self.clock += 1;
        let now = self.clock;
        let (set_idx, tag) = self.geometry.locate(addr);
        let segments = self.geometry.segments_for(size_bytes);
        if segments > self.geometry.budget_segments() {
            return Err(CacheError::BlockTooLarge {
                segments,
                budget: self.geometry.budget_segments(),
            });
        }

        let hit_idx = self.sets[set_idx].lookup(tag);
        let prioritized = match &mut self.sip {
            Some(sip) => {
                sip.tick();
                if sip.is_training() {
                    sip.observe(set_idx, tag, encoding, size_bytes, segments, is_write, hit_idx.is_some(), now)?;
                }
                sip.high_priority(size_bytes)
            }
            None => false,
        };

        let block = NewBlock {
            tag,
            encoding,
            size_bytes: size_bytes as u16,
            size_segments: segments as u16,
            rrpv: rrip_insert_value(self.rrip, prioritized),
            lru_stamp: now,
            dirty: is_write,
        };
        let selector_policy = if self.mve { self.policy } else { LocalPolicy::Rrip };
        let mut selector = Selector::for_policy(
            if self.policy == LocalPolicy::Lru { LocalPolicy::Lru } else { selector_policy },
            self.rrip,
        );
        let set = &mut self.sets[set_idx];
        let before = (set.valid_count(), set.used_segments());
        let before_bytes: usize = set.tags().iter().filter(|t| t.valid).count() * self.geometry.line_size;

        let evicted_entries = match (hit_idx, is_write) {
            (Some(i), false) => {
                let entry = &mut set.tags_mut()[i];
                rrip_on_hit(entry);
                entry.lru_stamp = now;
                Vec::new()
            }
            (_, true) => {
                write_update(set, &block, &mut selector, |e| {
                    rrip_on_hit(e);
                    e.lru_stamp = now;
                })?
                .evicted
            }
            (None, false) => insert_with_eviction(set, &block, &mut selector)?.evicted,
        };

        let after = (set.valid_count(), set.used_segments());
        let after_bytes = after.0 * self.geometry.line_size;
        self.resident_blocks = self.resident_blocks + after.0 - before.0;
        self.used_segments = self.used_segments + after.1 - before.1;
        self.resident_bytes = self.resident_bytes + after_bytes - before_bytes;

        let evicted = evicted_entries
            .into_iter()
            .map(|e| Eviction {
                addr: self.geometry.line_addr(set_idx, e.tag),
                dirty: e.dirty,
                encoding: e.encoding,
                size_bytes: e.size_bytes as usize,
            })
            .collect();
        Ok(AccessOutcome {
            hit: hit_idx.is_some(),
            set: set_idx,
            prioritized: hit_idx.is_none() && prioritized,
            evicted,
        })
    }

    pub fn snapshot(&self) -> CacheSnapshot {
        CacheSnapshot {
            sets: self
                .sets
                .iter()
                .map(|s| {
                    s.tags()
                        .iter()
                        .filter(|t| t.valid)
                        .map(|t| SnapshotEntry {
                            tag: t.tag,
                            encoding: t.encoding,
                            size_bytes: t.size_bytes as usize,
                            rrpv: t.rrpv,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Checks per-set occupancy and tag bounds.
    pub fn check_invariants(&self) -> Result<(), CacheError> {
        for set in &self.sets {
            set.check()?;
            if set.valid_count() > self.geometry.tag_slots() {
                return Err(CacheError::Invariant("too many valid tags".into()));
            }
        }
        Ok(())
    }
}
