use serde::{Deserialize, Serialize};

use super::set::{Demand, SetState, TagEntry, VictimSelector};
use super::CacheError;

/// Width of the re-reference prediction value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RripConfig {
    bits: u8,
}

impl RripConfig {
    pub fn new(bits: u8) -> Result<Self, CacheError> {
        if (1..=8).contains(&bits) {
            Ok(Self { bits })
        } else {
            Err(CacheError::Config(format!("RRPV width {bits} outside 1..=8")))
        }
    }

    pub fn bits(self) -> u8 {
        self.bits
    }

    /// `2^M - 1`
    pub fn max(self) -> u8 {
        ((1u16 << self.bits) - 1) as u8
    }
}

impl Default for RripConfig {
    fn default() -> Self {
        Self { bits: 3 }
    }
}

pub fn rrip_on_hit(entry: &mut TagEntry) {
    entry.rrpv = 0;
}

/// 0 for prioritized blocks, `2^M - 2` otherwise.
pub fn rrip_insert_value(cfg: RripConfig, high_priority: bool) -> u8 {
    if high_priority {
        0
    } else {
        cfg.max().saturating_sub(1)
    }
}

/// SRRIP victim search.
///
/// Returns the lowest-index valid entry at `RRPV_MAX`, incrementing every
/// valid entry's RRPV until one exists. The second value is the number of
/// increment rounds. `None` if no entry other than `protect` is valid.
pub fn rrip_select_victim(
    set: &mut SetState,
    cfg: RripConfig,
    protect: Option<usize>,
) -> Option<(usize, u32)> {
    let max = cfg.max();
    let candidates = |t: &(usize, &TagEntry)| t.1.valid && Some(t.0) != protect;
    if !set.tags.iter().enumerate().any(|t| candidates(&t)) {
        return None;
    }
    let top = set
        .tags
        .iter()
        .enumerate()
        .filter(candidates)
        .map(|(_, t)| t.rrpv)
        .max()
        .unwrap();
    let rounds = (max - top) as u32;
    if rounds > 0 {
        for t in set.tags.iter_mut().filter(|t| t.valid) {
            t.rrpv = t.rrpv.saturating_add(rounds as u8).min(max);
        }
    }
    let idx = set
        .tags
        .iter()
        .enumerate()
        .find(|t| candidates(t) && t.1.rrpv == max)
        .map(|(i, _)| i)
        .unwrap();
    Some((idx, rounds))
}

/// Ages the set the way an SRRIP victim search would, without evicting.
pub(crate) fn rrip_age(set: &mut SetState, cfg: RripConfig, protect: Option<usize>) {
    rrip_select_victim(set, cfg, protect);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RripSelector {
    pub cfg: RripConfig,
}

impl VictimSelector for RripSelector {
    fn select(&mut self, set: &mut SetState, demand: &Demand) -> Vec<usize> {
        rrip_select_victim(set, self.cfg, demand.protect)
            .map(|(i, _)| vec![i])
            .unwrap_or_default()
    }
}

pub fn lru_select_victim(set: &SetState, protect: Option<usize>) -> Option<usize> {
    set.tags
        .iter()
        .enumerate()
        .filter(|(i, t)| t.valid && Some(*i) != protect)
        .min_by_key(|(_, t)| t.lru_stamp)
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LruSelector;

impl VictimSelector for LruSelector {
    fn select(&mut self, set: &mut SetState, demand: &Demand) -> Vec<usize> {
        lru_select_victim(set, demand.protect)
            .map(|i| vec![i])
            .unwrap_or_default()
    }
}
