use serde::Serialize;

use super::CacheError;
use crate::compression::Encoding;

/// One tag-store entry of a compressed set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TagEntry {
    pub valid: bool,
    pub tag: u64,
    pub encoding: Encoding,
    pub size_bytes: u16,
    pub size_segments: u16,
    pub rrpv: u8,
    pub lru_stamp: u64,
    pub dirty: bool,
}

impl TagEntry {
    pub const INVALID: TagEntry = TagEntry {
        valid: false,
        tag: 0,
        encoding: Encoding::NoCompr,
        size_bytes: 0,
        size_segments: 0,
        rrpv: 0,
        lru_stamp: 0,
        dirty: false,
    };
}

/// A block about to be placed in a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NewBlock {
    pub tag: u64,
    pub encoding: Encoding,
    pub size_bytes: u16,
    pub size_segments: u16,
    pub rrpv: u8,
    pub lru_stamp: u64,
    pub dirty: bool,
}

impl NewBlock {
    pub fn entry(&self) -> TagEntry {
        TagEntry {
            valid: true,
            tag: self.tag,
            encoding: self.encoding,
            size_bytes: self.size_bytes,
            size_segments: self.size_segments,
            rrpv: self.rrpv,
            lru_stamp: self.lru_stamp,
            dirty: self.dirty,
        }
    }
}

/// What a victim selector has to make room for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Demand {
    /// Segments that must fit on top of the current occupancy.
    pub segments: usize,
    /// Whether a free tag slot is also required.
    pub need_tag: bool,
    /// Entry that must not be chosen (a block being rewritten in place).
    pub protect: Option<usize>,
}

/// Tags of one set plus the segment budget of its data store.
///
/// The data store is compacted implicitly, so only the total segment count
/// matters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SetState {
    pub(crate) tags: Vec<TagEntry>,
    pub(crate) used_segments: usize,
    pub(crate) budget_segments: usize,
}

impl SetState {
    pub fn new(tag_slots: usize, budget_segments: usize) -> Self {
        Self {
            tags: vec![TagEntry::INVALID; tag_slots],
            used_segments: 0,
            budget_segments,
        }
    }

    pub fn tags(&self) -> &[TagEntry] {
        &self.tags
    }

    pub fn tags_mut(&mut self) -> &mut [TagEntry] {
        &mut self.tags
    }

    pub fn used_segments(&self) -> usize {
        self.used_segments
    }

    pub fn budget_segments(&self) -> usize {
        self.budget_segments
    }

    pub fn free_segments(&self) -> usize {
        self.budget_segments - self.used_segments
    }

    pub fn valid_count(&self) -> usize {
        self.tags.iter().filter(|t| t.valid).count()
    }

    pub fn free_slot(&self) -> Option<usize> {
        self.tags.iter().position(|t| !t.valid)
    }

    pub fn lookup(&self, tag: u64) -> Option<usize> {
        self.tags.iter().position(|t| t.valid && t.tag == tag)
    }

    pub fn satisfies(&self, demand: &Demand) -> bool {
        (!demand.need_tag || self.free_slot().is_some())
            && self.used_segments + demand.segments <= self.budget_segments
    }

    /// Invalidates entry `idx` and returns what it held.
    pub fn evict(&mut self, idx: usize) -> TagEntry {
        let old = std::mem::replace(&mut self.tags[idx], TagEntry::INVALID);
        debug_assert!(old.valid, "evicting an invalid entry");
        self.used_segments -= old.size_segments as usize;
        old
    }

    /// Places `block` in a free slot. The caller must have made room.
    pub fn place(&mut self, block: &NewBlock) -> usize {
        let slot = self.free_slot().expect("place called without a free tag");
        assert!(self.used_segments + block.size_segments as usize <= self.budget_segments);
        self.tags[slot] = block.entry();
        self.used_segments += block.size_segments as usize;
        slot
    }

    /// Changes the size of a resident block, leaving room-making to the caller.
    pub(crate) fn resize(&mut self, idx: usize, encoding: Encoding, size_bytes: u16, size_segments: u16) {
        let entry = &mut self.tags[idx];
        self.used_segments = self.used_segments - entry.size_segments as usize + size_segments as usize;
        entry.encoding = encoding;
        entry.size_bytes = size_bytes;
        entry.size_segments = size_segments;
    }

    /// Checks the occupancy invariants.
    pub fn check(&self) -> Result<(), CacheError> {
        let sum: usize = self
            .tags
            .iter()
            .filter(|t| t.valid)
            .map(|t| t.size_segments as usize)
            .sum();
        if sum != self.used_segments {
            return Err(CacheError::Invariant(format!(
                "used_segments {} but resident blocks hold {sum}",
                self.used_segments
            )));
        }
        if self.used_segments > self.budget_segments {
            return Err(CacheError::Invariant(format!(
                "used_segments {} over budget {}",
                self.used_segments, self.budget_segments
            )));
        }
        Ok(())
    }
}

/// Chooses blocks to evict from a set.
pub trait VictimSelector {
    /// Victims in eviction order. Returning fewer than needed is fine, the
    /// caller asks again; returning none while the demand is unmet is an error.
    fn select(&mut self, set: &mut SetState, demand: &Demand) -> Vec<usize>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertOutcome {
    pub index: usize,
    pub evicted: Vec<TagEntry>,
}

/// Evicts blocks chosen by `selector` until `block` fits, then inserts it.
pub fn insert_with_eviction(
    set: &mut SetState,
    block: &NewBlock,
    selector: &mut dyn VictimSelector,
) -> Result<InsertOutcome, CacheError> {
    let demand = Demand {
        segments: block.size_segments as usize,
        need_tag: true,
        protect: None,
    };
    let evicted = make_room(set, &demand, selector)?;
    let index = set.place(block);
    Ok(InsertOutcome { index, evicted })
}

pub(crate) fn make_room(
    set: &mut SetState,
    demand: &Demand,
    selector: &mut dyn VictimSelector,
) -> Result<Vec<TagEntry>, CacheError> {
    if demand.segments > set.budget_segments {
        return Err(CacheError::BlockTooLarge {
            segments: demand.segments,
            budget: set.budget_segments,
        });
    }
    let mut evicted = Vec::new();
    while !set.satisfies(demand) {
        let victims = selector.select(set, demand);
        if victims.is_empty() {
            return Err(CacheError::NoVictim);
        }
        for v in victims {
            debug_assert_ne!(Some(v), demand.protect);
            evicted.push(set.evict(v));
        }
    }
    Ok(evicted)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteOutcome {
    pub index: usize,
    pub hit: bool,
    pub evicted: Vec<TagEntry>,
}

/// Writes a new version of a block into the set.
///
/// On a hit the block is resized in place, marked dirty and touched with
/// `touch` (the caller's hit update). If it grew, other blocks are evicted
/// until it fits. On a miss the block is inserted dirty.
pub fn write_update(
    set: &mut SetState,
    block: &NewBlock,
    selector: &mut dyn VictimSelector,
    touch: impl FnOnce(&mut TagEntry),
) -> Result<WriteOutcome, CacheError> {
    let Some(idx) = set.lookup(block.tag) else {
        let dirty = NewBlock {
            dirty: true,
            ..*block
        };
        let out = insert_with_eviction(set, &dirty, selector)?;
        return Ok(WriteOutcome {
            index: out.index,
            hit: false,
            evicted: out.evicted,
        });
    };
    if block.size_segments as usize > set.budget_segments {
        return Err(CacheError::BlockTooLarge {
            segments: block.size_segments as usize,
            budget: set.budget_segments,
        });
    }
    let old_segments = set.tags[idx].size_segments as usize;
    set.resize(idx, block.encoding, block.size_bytes, 0);
    {
        let entry = &mut set.tags[idx];
        entry.dirty = true;
        touch(entry);
    }
    let demand = Demand {
        segments: block.size_segments as usize,
        need_tag: false,
        protect: Some(idx),
    };
    let evicted = if block.size_segments as usize <= old_segments {
        Vec::new()
    } else {
        make_room(set, &demand, selector)?
    };
    set.resize(idx, block.encoding, block.size_bytes, block.size_segments);
    Ok(WriteOutcome {
        index: idx,
        hit: true,
        evicted,
    })
}
