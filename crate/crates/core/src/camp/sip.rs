use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cache::{
    insert_with_eviction, rrip_insert_value, rrip_on_hit, write_update, CacheError,
    CacheGeometry, LocalPolicy, NewBlock, RripConfig, Selector, SetState,
};
use crate::compression::Encoding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SipConfig {
    /// When false a `sip`/`camp` cache never prioritizes anything.
    pub enabled: bool,
    pub n_bins: usize,
    pub m_sets_per_bin: usize,
    pub train_fraction: f64,
    pub train_period_accesses: u64,
    pub ctr_width_bits: u8,
}

impl Default for SipConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            n_bins: 8,
            m_sets_per_bin: 32,
            train_fraction: 0.10,
            train_period_accesses: 10_000_000,
            ctr_width_bits: 16,
        }
    }
}

impl SipConfig {
    pub fn validate(&self) -> Result<(), CacheError> {
        let bad = |m: &str| Err(CacheError::Config(m.to_string()));
        if self.n_bins == 0 {
            return bad("sip.n_bins must be at least 1");
        }
        if self.m_sets_per_bin == 0 {
            return bad("sip.m_sets_per_bin must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return bad("sip.train_fraction must lie in [0, 1]");
        }
        if self.train_period_accesses == 0 {
            return bad("sip.train_period_accesses must be positive");
        }
        if !(2..=32).contains(&self.ctr_width_bits) {
            return bad("sip.ctr_width_bits must lie in 2..=32");
        }
        Ok(())
    }

    /// Accesses at the start of each period spent training.
    pub fn train_len(&self) -> u64 {
        (self.train_fraction * self.train_period_accesses as f64).round() as u64
    }
}

/// Size bin, 1-based: with 8 bins over 64B lines bin 1 is 0-8B, bin 2 is 9-16B.
pub fn size_bin(size_bytes: usize, line_size: usize, n_bins: usize) -> usize {
    let width = (line_size / n_bins).max(1);
    (size_bytes.max(1) - 1) / width + 1
}

/// One training event for a bin counter, saturating at `±(2^(w-1) - 1)`.
pub fn sip_training_step(ctr: i64, mtd_miss: bool, atd_miss: bool, width_bits: u8) -> i64 {
    let lim = (1i64 << (width_bits - 1)) - 1;
    let mut c = ctr;
    if mtd_miss {
        c = (c + 1).min(lim);
    }
    if atd_miss {
        c = (c - 1).max(-lim);
    }
    c
}

/// Bins (1-based) whose counter is positive.
pub fn sip_decide(ctrs: &[i64]) -> Vec<usize> {
    ctrs.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Leader set of the main cache plus its shadow tag directory.
#[derive(Debug, Clone)]
struct Leader {
    bin: usize,
    atd: SetState,
}

/// Set-sampled size-based insertion.
///
/// Leader sets shadow the main tag directory in an auxiliary one that inserts
/// the leader's bin with high priority. The shadow only ever feeds counters.
#[derive(Debug, Clone)]
pub struct SipController {
    cfg: SipConfig,
    line_size: usize,
    rrip: RripConfig,
    selector: Selector,
    leaders: HashMap<usize, Leader>,
    ctrs: Vec<i64>,
    last_ctrs: Vec<i64>,
    prioritized: Vec<bool>,
    accesses: u64,
    training: bool,
    decisions: u64,
}

impl SipController {
    pub fn new(
        cfg: SipConfig,
        geometry: &CacheGeometry,
        policy: LocalPolicy,
        rrip: RripConfig,
    ) -> Result<Self, CacheError> {
        cfg.validate()?;
        let sets = geometry.num_sets();
        let count = (cfg.n_bins * cfg.m_sets_per_bin).min(sets);
        let stride = sets / count.max(1);
        let leaders = (0..count)
            .map(|k| {
                (
                    k * stride,
                    Leader {
                        bin: k % cfg.n_bins + 1,
                        atd: SetState::new(geometry.tag_slots(), geometry.budget_segments()),
                    },
                )
            })
            .collect();
        Ok(Self {
            cfg,
            line_size: geometry.line_size,
            rrip,
            selector: Selector::for_policy(policy, rrip),
            leaders,
            ctrs: vec![0; cfg.n_bins],
            last_ctrs: vec![0; cfg.n_bins],
            prioritized: vec![false; cfg.n_bins],
            accesses: 0,
            training: false,
            decisions: 0,
        })
    }

    pub fn config(&self) -> &SipConfig {
        &self.cfg
    }

    /// Leader set index to bin (1-based).
    pub fn leader_sets(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.leaders.iter().map(|(&s, l)| (s, l.bin)).collect();
        v.sort_unstable();
        v
    }

    /// Advances the phase clock by one access. Call before the access.
    pub fn tick(&mut self) {
        let pos = self.accesses % self.cfg.train_period_accesses;
        let train_len = self.cfg.train_len();
        if pos == 0 && train_len > 0 {
            self.ctrs.iter_mut().for_each(|c| *c = 0);
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
        self.last_ctrs = self.ctrs.clone();
        self.prioritized = vec![false; self.cfg.n_bins];
        for bin in sip_decide(&self.ctrs) {
            self.prioritized[bin - 1] = true;
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn ctrs(&self) -> &[i64] {
        &self.ctrs
    }

    /// Counters as they stood at the most recent decision.
    pub fn last_decision_ctrs(&self) -> &[i64] {
        &self.last_ctrs
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn prioritized_bins(&self) -> Vec<usize> {
        (1..=self.cfg.n_bins).filter(|&b| self.prioritized[b - 1]).collect()
    }

    /// Steady-state insertion priority for a block of this size.
    pub fn high_priority(&self, size_bytes: usize) -> bool {
        !self.training && self.prioritized[self.bin_of(size_bytes) - 1]
    }

    fn bin_of(&self, size_bytes: usize) -> usize {
        size_bin(size_bytes, self.line_size, self.cfg.n_bins).min(self.cfg.n_bins)
    }

    /// Records a training access to `set`. No-op outside leader sets.
    #[allow(clippy::too_many_arguments)]
    pub fn observe(
        &mut self,
        set: usize,
        tag: u64,
        encoding: Encoding,
        size_bytes: usize,
        segments: usize,
        is_write: bool,
        mtd_hit: bool,
        now: u64,
    ) -> Result<(), CacheError> {
        let block_bin = self.bin_of(size_bytes);
        let Some(leader) = self.leaders.get_mut(&set) else {
            return Ok(());
        };
        let atd = &mut leader.atd;
        let atd_idx = atd.lookup(tag);
        let block = NewBlock {
            tag,
            encoding,
            size_bytes: size_bytes as u16,
            size_segments: segments as u16,
            rrpv: rrip_insert_value(self.rrip, block_bin == leader.bin),
            lru_stamp: now,
            dirty: is_write,
        };
        match (atd_idx, is_write) {
            (Some(i), false) => {
                let e = &mut atd.tags_mut()[i];
                rrip_on_hit(e);
                e.lru_stamp = now;
            }
            (_, true) => {
                write_update(atd, &block, &mut self.selector, |e| {
                    rrip_on_hit(e);
                    e.lru_stamp = now;
                })?;
            }
            (None, false) => {
                insert_with_eviction(atd, &block, &mut self.selector)?;
            }
        }
        let b = leader.bin - 1;
        self.ctrs[b] = sip_training_step(
            self.ctrs[b],
            !mtd_hit,
            atd_idx.is_none(),
            self.cfg.ctr_width_bits,
        );
        Ok(())
    }
}
