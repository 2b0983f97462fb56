use std::collections::{BTreeMap, HashMap};

/// LRU cache of per-page metadata, keyed by page number.
#[derive(Debug, Clone)]
pub struct MdCache {
    capacity: usize,
    clock: u64,
    stamp_of: HashMap<u64, u64>,
    by_stamp: BTreeMap<u64, u64>,
    hits: u64,
    misses: u64,
}

impl MdCache {
    pub const DEFAULT_ENTRIES: usize = 512;

    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            clock: 0,
            stamp_of: HashMap::new(),
            by_stamp: BTreeMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    /// Looks up `page`, installing it on a miss. Returns whether it hit.
    pub fn access(&mut self, page: u64) -> bool {
        self.clock += 1;
        if self.capacity == 0 {
            self.misses += 1;
            return false;
        }
        let hit = match self.stamp_of.insert(page, self.clock) {
            Some(old) => {
                self.by_stamp.remove(&old);
                true
            }
            None => {
                if self.stamp_of.len() > self.capacity {
                    let (_, victim) = self.by_stamp.pop_first().expect("non-empty");
                    self.stamp_of.remove(&victim);
                }
                false
            }
        };
        self.by_stamp.insert(self.clock, page);
        if hit {
            self.hits += 1;
        } else {
            self.misses += 1;
        }
        hit
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

impl Default for MdCache {
    fn default() -> Self {
        Self::new(Self::DEFAULT_ENTRIES)
    }
}
