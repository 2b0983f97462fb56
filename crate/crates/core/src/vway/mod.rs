//! V-Way cache: decoupled tag and data stores with global replacement.
//!
//! Tag sets have `tag_factor × assoc` ways; each tag points (fptr) at a slot of
//! a data entry, and each occupied slot points back (rptr) at its tag. A data
//! entry is one uncompressed line of segments shared by up to
//! `rptrs_per_entry` compressed blocks. The data store is split into regions;
//! a block lives in region `set mod num_regions`.
//!
//! Replacement inside a region is Reuse Replacement (scan reuse counters from
//! PTR for a zero) or G-MVE (rank a 64-block window by `(ctr + 1) / bucket`).
//! G-SIP and G-CAMP duel regions against a baseline region during training.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheError, CacheGeometry, Eviction};
use crate::camp::MveValue;
use crate::compression::{bucket_unchecked, Encoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VwayPolicy {
    Vway,
    Gmve,
    Gsip,
    Gcamp,
}

impl VwayPolicy {
    pub const ALL: [VwayPolicy; 4] = [VwayPolicy::Vway, VwayPolicy::Gmve, VwayPolicy::Gsip, VwayPolicy::Gcamp];

    pub fn name(self) -> &'static str {
        match self {
            VwayPolicy::Vway => "vway",
            VwayPolicy::Gmve => "gmve",
            VwayPolicy::Gsip => "gsip",
            VwayPolicy::Gcamp => "gcamp",
        }
    }

    fn duels(self) -> bool {
        matches!(self, VwayPolicy::Gsip | VwayPolicy::Gcamp)
    }
}

impl fmt::Display for VwayPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VwayPolicy {
    type Err = CacheError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VwayPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CacheError::Config(format!("unknown policy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VwayConfig {
    pub num_regions: usize,
    pub rptrs_per_entry: usize,
    /// Saturation value of the per-block reuse counter.
    pub reuse_ctr_max: u8,
    /// Valid blocks examined per G-MVE replacement.
    pub window: usize,
    pub train_fraction: f64,
    pub train_period_accesses: u64,
}

impl Default for VwayConfig {
    fn default() -> Self {
        Self {
            num_regions: 8,
            rptrs_per_entry: 2,
            reuse_ctr_max: 3,
            window: 64,
            train_fraction: 0.10,
            train_period_accesses: 10_000_000,
        }
    }
}

/// Number of size bins dueled by G-SIP (bin = segment count, 7 and 8 merged).
pub const VWAY_SIZE_BINS: usize = 7;

pub fn vway_size_bin(segments: usize) -> usize {
    segments.clamp(1, VWAY_SIZE_BINS)
}

/// Reuse Replacement scan over one region's counters.
///
/// `None` marks an empty slot, which is skipped. Starting at `ptr`, the first
/// zero counter is the victim; every non-zero counter passed on the way is
/// decremented. Returns the victim and the slot after it, or `None` when all
/// slots are empty.
pub fn reuse_replacement_victim(counters: &mut [Option<u8>], ptr: usize) -> Option<(usize, usize)> {
    if counters.iter().all(Option::is_none) {
        return None;
    }
    let n = counters.len();
    let mut i = ptr % n;
    loop {
        if let Some(c) = counters[i].as_mut() {
            if *c == 0 {
                return Some((i, (i + 1) % n));
            }
            *c -= 1;
        }
        i = (i + 1) % n;
    }
}

pub fn gsip_decide(bin_misses: &[u64], baseline_misses: u64) -> Vec<usize> {
    bin_misses
        .iter()
        .enumerate()
        .filter(|(_, &m)| m < baseline_misses)
        .map(|(i, _)| i + 1)
        .collect()
}

/// `true` keeps G-MVE on; it is disabled only if the Reuse Replacement
/// control region missed strictly less than the baseline.
pub fn gcamp_duel(control_misses: u64, baseline_misses: u64) -> bool {
    control_misses >= baseline_misses
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Bin(usize),
    Baseline,
    ReuseControl,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VwayTagEntry {
    pub valid: bool,
    pub tag: u64,
    /// Global slot index: `entry * rptrs_per_entry + slot`.
    pub fptr: usize,
    pub encoding: Encoding,
    pub size_bytes: u16,
    pub dirty: bool,
}

impl VwayTagEntry {
    const INVALID: VwayTagEntry = VwayTagEntry {
        valid: false,
        tag: 0,
        fptr: 0,
        encoding: Encoding::NoCompr,
        size_bytes: 0,
        dirty: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DataSlot {
    pub valid: bool,
    /// Global tag index: `set * tag_ways + way`.
    pub rptr: usize,
    pub segments: u8,
    pub reuse: u8,
}

impl DataSlot {
    const EMPTY: DataSlot = DataSlot {
        valid: false,
        rptr: 0,
        segments: 0,
        reuse: 0,
    };
}

#[derive(Debug, Clone)]
struct Region {
    first_entry: usize,
    entries: usize,
    /// Relative slot index of the scan cursor.
    ptr: usize,
    misses: u64,
    used_segments: usize,
    valid_blocks: usize,
    /// Entries with a free slot, keyed by free segment count.
    free_index: Vec<BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VwayOutcome {
    pub hit: bool,
    pub set: usize,
    pub prioritized: bool,
    pub evicted: Vec<Eviction>,
}

/// Counters at the end of the most recent training phase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DuelSummary {
    pub region_misses: Vec<u64>,
    pub prioritized_bins: Vec<usize>,
    pub gmve_enabled: bool,
}

#[derive(Debug, Clone)]
pub struct VwayCache {
    geometry: CacheGeometry,
    cfg: VwayConfig,
    policy: VwayPolicy,
    tag_ways: usize,
    seg_per_entry: usize,
    tags: Vec<VwayTagEntry>,
    slots: Vec<DataSlot>,
    entry_used: Vec<usize>,
    regions: Vec<Region>,
    accesses: u64,
    training: bool,
    decisions: u64,
    prioritized: Vec<bool>,
    gmve_enabled: bool,
    last_duel: DuelSummary,
    tie_evictions: u64,
    resident_blocks: usize,
    used_segments: usize,
}

impl VwayCache {
    pub fn new(geometry: CacheGeometry, policy: VwayPolicy, cfg: VwayConfig) -> Result<Self, CacheError> {
        geometry.validate()?;
        let bad = |m: String| Err(CacheError::Config(m));
        let data_entries = geometry.capacity_bytes / geometry.line_size;
        if cfg.num_regions == 0 || data_entries % cfg.num_regions != 0 {
            return bad(format!("{data_entries} data entries not divisible into {} regions", cfg.num_regions));
        }
        let min_regions = match policy {
            VwayPolicy::Gsip => 2,
            VwayPolicy::Gcamp => 3,
            _ => 1,
        };
        if cfg.num_regions < min_regions {
            return bad(format!("{policy} needs at least {min_regions} regions"));
        }
        if cfg.rptrs_per_entry == 0 || cfg.window == 0 || cfg.reuse_ctr_max == 0 {
            return bad("rptrs_per_entry, window and reuse_ctr_max must be positive".into());
        }
        if !(0.0..=1.0).contains(&cfg.train_fraction) || cfg.train_period_accesses == 0 {
            return bad("invalid training schedule".into());
        }
        let seg_per_entry = geometry.line_size / geometry.segment_bytes;
        let per_region = data_entries / cfg.num_regions;
        let regions = (0..cfg.num_regions)
            .map(|r| {
                let mut free_index = vec![BTreeSet::new(); seg_per_entry + 1];
                free_index[seg_per_entry].extend(r * per_region..(r + 1) * per_region);
                Region {
                    first_entry: r * per_region,
                    entries: per_region,
                    ptr: 0,
                    misses: 0,
                    used_segments: 0,
                    valid_blocks: 0,
                    free_index,
                }
            })
            .collect();
        let tag_ways = geometry.tag_slots();
        Ok(Self {
            geometry,
            cfg,
            policy,
            tag_ways,
            seg_per_entry,
            tags: vec![VwayTagEntry::INVALID; geometry.num_sets() * tag_ways],
            slots: vec![DataSlot::EMPTY; data_entries * cfg.rptrs_per_entry],
            entry_used: vec![0; data_entries],
            regions,
            accesses: 0,
            training: false,
            decisions: 0,
            prioritized: vec![false; VWAY_SIZE_BINS],
            gmve_enabled: true,
            last_duel: DuelSummary::default(),
            tie_evictions: 0,
            resident_blocks: 0,
            used_segments: 0,
        })
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geometry
    }

    pub fn policy(&self) -> VwayPolicy {
        self.policy
    }

    pub fn tags(&self) -> &[VwayTagEntry] {
        &self.tags
    }

    pub fn slots(&self) -> &[DataSlot] {
        &self.slots
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn last_duel(&self) -> &DuelSummary {
        &self.last_duel
    }

    pub fn prioritized_bins(&self) -> Vec<usize> {
        (1..=VWAY_SIZE_BINS).filter(|&b| self.prioritized[b - 1]).collect()
    }

    pub fn gmve_enabled(&self) -> bool {
        self.gmve_enabled
    }

    /// G-MVE evictions whose victim had the same value as the best survivor
    /// in its window.
    pub fn tie_evictions(&self) -> u64 {
        self.tie_evictions
    }

    pub fn resident_blocks(&self) -> usize {
        self.resident_blocks
    }

    pub fn resident_bytes(&self) -> usize {
        self.resident_blocks * self.geometry.line_size
    }

    pub fn used_segments(&self) -> usize {
        self.used_segments
    }

    pub fn region_of_set(&self, set: usize) -> usize {
        set % self.cfg.num_regions
    }

    fn role(&self, region: usize) -> Role {
        let r = self.cfg.num_regions;
        match self.policy {
            VwayPolicy::Gsip if region == r - 1 => Role::Baseline,
            VwayPolicy::Gsip if region < VWAY_SIZE_BINS => Role::Bin(region + 1),
            VwayPolicy::Gcamp if region == r - 1 => Role::Baseline,
            VwayPolicy::Gcamp if region == r - 2 => Role::ReuseControl,
            VwayPolicy::Gcamp if region < VWAY_SIZE_BINS - 1 => Role::Bin(region + 1),
            _ => Role::Plain,
        }
    }

    fn uses_gmve(&self, region: usize) -> bool {
        match self.policy {
            VwayPolicy::Vway | VwayPolicy::Gsip => false,
            VwayPolicy::Gmve => true,
            VwayPolicy::Gcamp => {
                if self.training {
                    self.role(region) != Role::ReuseControl
                } else {
                    self.gmve_enabled
                }
            }
        }
    }

    fn high_priority(&self, region: usize, segments: usize) -> bool {
        if !self.policy.duels() {
            return false;
        }
        let bin = vway_size_bin(segments);
        if self.training {
            self.role(region) == Role::Bin(bin)
        } else {
            self.prioritized[bin - 1]
        }
    }

    fn tick(&mut self) {
        if !self.policy.duels() {
            return;
        }
        let period = self.cfg.train_period_accesses;
        let train_len = (self.cfg.train_fraction * period as f64).round() as u64;
        let pos = self.accesses % period;
        if pos == 0 && train_len > 0 {
            self.regions.iter_mut().for_each(|r| r.misses = 0);
            self.training = true;
        }
        if pos == train_len && self.training {
            self.finish_training();
        }
        self.accesses += 1;
    }

    fn finish_training(&mut self) {
        self.training = false;
        self.decisions += 1;
        let misses: Vec<u64> = self.regions.iter().map(|r| r.misses).collect();
        let baseline = (0..self.regions.len())
            .find(|&r| self.role(r) == Role::Baseline)
            .map(|r| misses[r])
            .unwrap_or(0);
        let mut bin_misses = vec![u64::MAX; VWAY_SIZE_BINS];
        for r in 0..self.regions.len() {
            if let Role::Bin(b) = self.role(r) {
                bin_misses[b - 1] = misses[r];
            }
        }
        self.prioritized = vec![false; VWAY_SIZE_BINS];
        for b in gsip_decide(&bin_misses, baseline) {
            self.prioritized[b - 1] = true;
        }
        if self.policy == VwayPolicy::Gcamp {
            let control = (0..self.regions.len())
                .find(|&r| self.role(r) == Role::ReuseControl)
                .map(|r| misses[r])
                .unwrap_or(u64::MAX);
            self.gmve_enabled = gcamp_duel(control, baseline);
        }
        self.last_duel = DuelSummary {
            region_misses: misses,
            prioritized_bins: self.prioritized_bins(),
            gmve_enabled: self.gmve_enabled,
        };
    }

    fn value_of_slot(&self, slot: usize) -> MveValue {
        let s = &self.slots[slot];
        let size = self.tags[s.rptr].size_bytes as usize;
        MveValue {
            p: s.reuse as u32 + 1,
            s: bucket_unchecked(size),
        }
    }

    pub fn access(
        &mut self,
        addr: u64,
        is_write: bool,
        encoding: Encoding,
        size_bytes: usize,
    ) -> Result<VwayOutcome, CacheError> {
        self.tick();
        let (set, tag) = self.geometry.locate(addr);
        let segments = self.geometry.segments_for(size_bytes);
        if segments > self.seg_per_entry {
            return Err(CacheError::BlockTooLarge {
                segments,
                budget: self.seg_per_entry,
            });
        }
        let region = self.region_of_set(set);
        let base = set * self.tag_ways;
        let way = (0..self.tag_ways).find(|&w| {
            let t = &self.tags[base + w];
            t.valid && t.tag == tag
        });

        if let Some(w) = way {
            let ti = base + w;
            let slot = self.tags[ti].fptr;
            let max = self.cfg.reuse_ctr_max;
            let s = &mut self.slots[slot];
            s.reuse = (s.reuse + 1).min(max);
            let mut evicted = Vec::new();
            if is_write {
                self.tags[ti].dirty = true;
                self.tags[ti].encoding = encoding;
                self.tags[ti].size_bytes = size_bytes as u16;
                if self.slots[slot].segments as usize != segments {
                    let reuse = self.slots[slot].reuse;
                    self.free_slot(slot);
                    let new_slot = self.allocate(region, segments, &mut evicted)?;
                    self.fill_slot(new_slot, ti, segments, reuse);
                }
            }
            return Ok(VwayOutcome {
                hit: true,
                set,
                prioritized: false,
                evicted,
            });
        }

        if self.training {
            self.regions[region].misses += 1;
        }
        let mut evicted = Vec::new();
        let w = match (0..self.tag_ways).find(|&w| !self.tags[base + w].valid) {
            Some(w) => w,
            None => {
                let victim = self.tag_pressure_victim(set);
                evicted.push(self.evict_tag(base + victim));
                victim
            }
        };
        let ti = base + w;
        let slot = self.allocate(region, segments, &mut evicted)?;
        let prioritized = self.high_priority(region, segments);
        self.tags[ti] = VwayTagEntry {
            valid: true,
            tag,
            fptr: slot,
            encoding,
            size_bytes: size_bytes as u16,
            dirty: is_write,
        };
        let reuse = if prioritized { self.cfg.reuse_ctr_max } else { 0 };
        self.fill_slot(slot, ti, segments, reuse);
        Ok(VwayOutcome {
            hit: false,
            set,
            prioritized,
            evicted,
        })
    }

    /// Way of the least valuable block in a full tag set.
    fn tag_pressure_victim(&self, set: usize) -> usize {
        let base = set * self.tag_ways;
        (0..self.tag_ways)
            .min_by(|&a, &b| {
                let (sa, sb) = (self.tags[base + a].fptr, self.tags[base + b].fptr);
                self.value_of_slot(sa)
                    .cmp(&self.value_of_slot(sb))
                    .then(self.slots[sb].segments.cmp(&self.slots[sa].segments))
                    .then(a.cmp(&b))
            })
            .expect("tag set has ways")
    }

    fn region_of_entry(&self, entry: usize) -> usize {
        entry / self.regions[0].entries
    }

    fn reindex_entry(&mut self, entry: usize, before: Option<usize>) {
        let region = self.region_of_entry(entry);
        let key = self.index_key(entry);
        let r = &mut self.regions[region];
        if let Some(f) = before {
            r.free_index[f].remove(&entry);
        }
        if let Some(f) = key {
            r.free_index[f].insert(entry);
        }
    }

    fn index_key(&self, entry: usize) -> Option<usize> {
        let k = self.cfg.rptrs_per_entry;
        self.slots[entry * k..(entry + 1) * k]
            .iter()
            .any(|s| !s.valid)
            .then(|| self.seg_per_entry - self.entry_used[entry])
    }

    fn fill_slot(&mut self, slot: usize, tag_index: usize, segments: usize, reuse: u8) {
        let entry = slot / self.cfg.rptrs_per_entry;
        let before = self.index_key(entry);
        self.slots[slot] = DataSlot {
            valid: true,
            rptr: tag_index,
            segments: segments as u8,
            reuse,
        };
        self.tags[tag_index].fptr = slot;
        self.entry_used[entry] += segments;
        self.reindex_entry(entry, before);
        let region = self.region_of_entry(entry);
        self.regions[region].used_segments += segments;
        self.regions[region].valid_blocks += 1;
        self.used_segments += segments;
        self.resident_blocks += 1;
    }

    fn free_slot(&mut self, slot: usize) {
        let entry = slot / self.cfg.rptrs_per_entry;
        let before = self.index_key(entry);
        let segments = self.slots[slot].segments as usize;
        self.slots[slot] = DataSlot::EMPTY;
        self.entry_used[entry] -= segments;
        self.reindex_entry(entry, before);
        let region = self.region_of_entry(entry);
        self.regions[region].used_segments -= segments;
        self.regions[region].valid_blocks -= 1;
        self.used_segments -= segments;
        self.resident_blocks -= 1;
    }

    fn evict_tag(&mut self, tag_index: usize) -> Eviction {
        let t = self.tags[tag_index];
        self.free_slot(t.fptr);
        self.tags[tag_index] = VwayTagEntry::INVALID;
        let set = tag_index / self.tag_ways;
        Eviction {
            addr: self.geometry.line_addr(set, t.tag),
            dirty: t.dirty,
            encoding: t.encoding,
            size_bytes: t.size_bytes as usize,
        }
    }

    fn first_fit(&self, region: usize, segments: usize) -> Option<usize> {
        let r = &self.regions[region];
        let entry = (segments..=self.seg_per_entry)
            .filter_map(|f| r.free_index[f].first().copied())
            .min()?;
        let k = self.cfg.rptrs_per_entry;
        (entry * k..(entry + 1) * k).find(|&s| !self.slots[s].valid)
    }

    /// Finds a slot for `segments` in `region`, evicting as needed.
    fn allocate(&mut self, region: usize, segments: usize, evicted: &mut Vec<Eviction>) -> Result<usize, CacheError> {
        loop {
            if let Some(slot) = self.first_fit(region, segments) {
                return Ok(slot);
            }
            if self.regions[region].valid_blocks == 0 {
                return Err(CacheError::NoVictim);
            }
            if self.uses_gmve(region) {
                for slot in self.gmve_window(region) {
                    let ti = self.slots[slot].rptr;
                    evicted.push(self.evict_tag(ti));
                    if self.first_fit(region, segments).is_some() {
                        break;
                    }
                }
            } else {
                let slot = self.reuse_victim(region);
                let ti = self.slots[slot].rptr;
                evicted.push(self.evict_tag(ti));
            }
        }
    }

    fn region_slots(&self, region: usize) -> std::ops::Range<usize> {
        let r = &self.regions[region];
        let k = self.cfg.rptrs_per_entry;
        r.first_entry * k..(r.first_entry + r.entries) * k
    }

    fn reuse_victim(&mut self, region: usize) -> usize {
        let range = self.region_slots(region);
        let n = range.len();
        let start = range.start;
        let mut i = self.regions[region].ptr;
        loop {
            let s = &mut self.slots[start + i];
            if s.valid {
                if s.reuse == 0 {
                    self.regions[region].ptr = (i + 1) % n;
                    return start + i;
                }
                s.reuse -= 1;
            }
            i = (i + 1) % n;
        }
    }

    /// The next window of valid blocks from PTR, least valuable first.
    /// Counters in the window are decremented after their value is taken.
    fn gmve_window(&mut self, region: usize) -> Vec<usize> {
        let range = self.region_slots(region);
        let n = range.len();
        let start = range.start;
        let ptr = self.regions[region].ptr;
        let mut window = Vec::new();
        let mut last = ptr;
        for step in 0..n {
            let i = (ptr + step) % n;
            if self.slots[start + i].valid {
                window.push(start + i);
                last = i;
                if window.len() == self.cfg.window {
                    break;
                }
            }
        }
        self.regions[region].ptr = (last + 1) % n;
        let mut ranked: Vec<(MveValue, u8, usize)> = window
            .iter()
            .map(|&s| (self.value_of_slot(s), self.slots[s].segments, s))
            .collect();
        ranked.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        if ranked.len() > 1 && ranked[0].0 == ranked[1].0 {
            self.tie_evictions += 1;
        }
        for &s in &window {
            let c = &mut self.slots[s].reuse;
            *c = c.saturating_sub(1);
        }
        ranked.into_iter().map(|(_, _, s)| s).collect()
    }

    /// Checks pointer bijection, per-entry capacity and region accounting.
    pub fn check_invariants(&self) -> Result<(), CacheError> {
        let err = |m: String| Err(CacheError::Invariant(m));
        for (ti, t) in self.tags.iter().enumerate() {
            if t.valid {
                let s = &self.slots[t.fptr];
                if !s.valid || s.rptr != ti {
                    return err(format!("tag {ti} fptr {} does not point back", t.fptr));
                }
                if self.region_of_entry(t.fptr / self.cfg.rptrs_per_entry) != self.region_of_set(ti / self.tag_ways) {
                    return err(format!("tag {ti} data outside its region"));
                }
            }
        }
        for (si, s) in self.slots.iter().enumerate() {
            if s.valid {
                let t = &self.tags[s.rptr];
                if !t.valid || t.fptr != si {
                    return err(format!("slot {si} rptr {} does not point back", s.rptr));
                }
                if s.segments as usize != self.geometry.segments_for(t.size_bytes as usize) {
                    return err(format!("slot {si} size mismatch"));
                }
            }
        }
        let k = self.cfg.rptrs_per_entry;
        for (e, &used) in self.entry_used.iter().enumerate() {
            let sum: usize = self.slots[e * k..(e + 1) * k]
                .iter()
                .filter(|s| s.valid)
                .map(|s| s.segments as usize)
                .sum();
            if sum != used || used > self.seg_per_entry {
                return err(format!("entry {e} holds {sum} segments, recorded {used}"));
            }
        }
        let region_total: usize = self.regions.iter().map(|r| r.used_segments).sum();
        if region_total != self.used_segments {
            return err(format!("regions hold {region_total}, global {}", self.used_segments));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reuse_scan_examples() {
        let mut c = vec![Some(2), Some(0), Some(1)];
        assert_eq!(reuse_replacement_victim(&mut c, 0), Some((1, 2)));
        assert_eq!(c[0], Some(1));

        let mut z = vec![Some(0); 4];
        assert_eq!(reuse_replacement_victim(&mut z, 2), Some((2, 3)));

        let mut full = vec![Some(3); 4];
        assert_eq!(reuse_replacement_victim(&mut full, 1), Some((1, 2)));
        assert_eq!(full, vec![Some(0), Some(0), Some(0), Some(0)]);

        let mut gaps = vec![None, Some(1), None];
        assert_eq!(reuse_replacement_victim(&mut gaps, 0), Some((1, 2)));
        assert_eq!(reuse_replacement_victim(&mut [None, None], 0), None);
    }

    #[test]
    fn duel_rules() {
        assert_eq!(gsip_decide(&[100, 200], 150), vec![1]);
        assert!(gsip_decide(&[150], 150).is_empty());
        assert!(gsip_decide(&[151, 400], 150).is_empty());
        assert!(!gcamp_duel(90, 100));
        assert!(gcamp_duel(100, 90));
        assert!(gcamp_duel(100, 100));
    }

    fn small(policy: VwayPolicy, regions: usize) -> VwayCache {
        let cfg = VwayConfig {
            num_regions: regions,
            ..VwayConfig::default()
        };
        VwayCache::new(CacheGeometry::new(64 * 16, 64, 4), policy, cfg).unwrap()
    }

    #[test]
    fn insert_then_hit_increments_counter() {
        let mut c = small(VwayPolicy::Vway, 1);
        let out = c.access(0, false, Encoding::NoCompr, 64).unwrap();
        assert!(!out.hit && out.evicted.is_empty());
        let slot = c.tags().iter().find(|t| t.valid).unwrap().fptr;
        assert_eq!(c.slots()[slot].reuse, 0);
        assert!(c.access(0, false, Encoding::NoCompr, 64).unwrap().hit);
        assert_eq!(c.slots()[slot].reuse, 1);
        c.check_invariants().unwrap();
    }

    #[test]
    fn two_blocks_share_an_entry() {
        let mut c = small(VwayPolicy::Vway, 1);
        c.access(0, false, Encoding::Base8Delta4, 40).unwrap();
        c.access(64, false, Encoding::Base8Delta2, 24).unwrap();
        assert_eq!(c.slots()[0].segments + c.slots()[1].segments, 8);
        c.check_invariants().unwrap();
    }

    #[test]
    fn small_blocks_make_way_for_a_large_one() {
        // 16 entries, 1 region, 32 tags over 4 sets; fill with 1-segment blocks
        let mut c = small(VwayPolicy::Gmve, 1);
        for i in 0..32u64 {
            c.access(i * 64, false, Encoding::Zeros, 1).unwrap();
        }
        assert_eq!(c.resident_blocks(), 32);
        let out = c.access(32 * 64, false, Encoding::NoCompr, 64).unwrap();
        // tag pressure frees one; G-MVE must then empty a whole entry
        assert!(out.evicted.len() >= 2);
        c.check_invariants().unwrap();
    }

    #[test]
    fn write_growth_reallocates() {
        let mut c = small(VwayPolicy::Vway, 1);
        for i in 0..32u64 {
            c.access(i * 64, false, Encoding::Base8Delta1, 16).unwrap();
        }
        let out = c.access(0, true, Encoding::NoCompr, 64).unwrap();
        assert!(out.hit);
        c.check_invariants().unwrap();
        let t = c.tags().iter().find(|t| t.valid && t.tag == 0).unwrap();
        assert!(t.dirty);
        assert_eq!(c.slots()[t.fptr].segments, 8);
    }

    #[test]
    fn oversize_and_bad_config_rejected() {
        let g = CacheGeometry::new(64 * 16, 64, 4);
        assert!(VwayCache::new(g, VwayPolicy::Gcamp, VwayConfig { num_regions: 2, ..Default::default() }).is_err());
        assert!(VwayCache::new(g, VwayPolicy::Vway, VwayConfig { num_regions: 3, ..Default::default() }).is_err());
    }

    #[test]
    fn policy_names() {
        for p in VwayPolicy::ALL {
            assert_eq!(p.name().parse::<VwayPolicy>().unwrap(), p);
        }
    }
}
