use std::cmp::Ordering;

use crate::cache::{rrip_age, rrip_select_victim, Demand, RripConfig, SetState, VictimSelector};
use crate::compression::bucket_unchecked;

/// `p / s`, compared exactly by cross-multiplication.
#[derive(Debug, Clone, Copy)]
pub struct MveValue {
    pub p: u32,
    pub s: u32,
}

impl MveValue {
    pub fn as_f64(self) -> f64 {
        self.p as f64 / self.s as f64
    }
}

impl PartialEq for MveValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for MveValue {}

impl PartialOrd for MveValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MveValue {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.p as u64 * other.s as u64).cmp(&(other.p as u64 * self.s as u64))
    }
}

/// `(2^M - rrpv) / size_bucket(size_bytes)`.
pub fn mve_value(rrpv: u8, size_bytes: usize, cfg: RripConfig) -> MveValue {
    debug_assert!(rrpv <= cfg.max());
    MveValue {
        p: cfg.max() as u32 + 1 - rrpv as u32,
        s: bucket_unchecked(size_bytes),
    }
}

/// Valid entries other than `protect`, least valuable first.
///
/// Ties go to the larger block, then the lower index. `bucket` maps a size in
/// bytes to its denominator.
pub fn mve_rank_with(
    set: &SetState,
    cfg: RripConfig,
    protect: Option<usize>,
    bucket: impl Fn(usize) -> u32,
) -> Vec<usize> {
    let mut ranked: Vec<(MveValue, u16, usize)> = set
        .tags()
        .iter()
        .enumerate()
        .filter(|(i, t)| t.valid && Some(*i) != protect)
        .map(|(i, t)| {
            let v = MveValue {
                p: cfg.max() as u32 + 1 - t.rrpv as u32,
                s: bucket(t.size_bytes as usize),
            };
            (v, t.size_segments, i)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    ranked.into_iter().map(|(_, _, i)| i).collect()
}

pub fn mve_rank(set: &SetState, cfg: RripConfig, protect: Option<usize>) -> Vec<usize> {
    mve_rank_with(set, cfg, protect, bucket_unchecked)
}

/// Victims for `demand`, in eviction order.
///
/// Empty when the demand is already met. When only a tag is missing the
/// RRIP victim is used. Otherwise the set is aged as an RRIP search would
/// age it and the least valuable blocks are taken until the block fits.
pub fn mve_select_victims(set: &mut SetState, demand: &Demand, cfg: RripConfig) -> Vec<usize> {
    if set.satisfies(demand) {
        return Vec::new();
    }
    if set.used_segments() + demand.segments <= set.budget_segments() {
        return rrip_select_victim(set, cfg, demand.protect)
            .map(|(i, _)| vec![i])
            .unwrap_or_default();
    }
    rrip_age(set, cfg, demand.protect);
    let mut freed = 0usize;
    let mut victims = Vec::new();
    for idx in mve_rank(set, cfg, demand.protect) {
        if set.used_segments() - freed + demand.segments <= set.budget_segments() {
            break;
        }
        freed += set.tags()[idx].size_segments as usize;
        victims.push(idx);
    }
    victims
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MveSelector {
    pub cfg: RripConfig,
}

impl VictimSelector for MveSelector {
    fn select(&mut self, set: &mut SetState, demand: &Demand) -> Vec<usize> {
        mve_select_victims(set, demand, self.cfg)
    }
}
