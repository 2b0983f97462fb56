//! Compression-aware management for the set-associative cache.
//!
//! MVE evicts the blocks with the least value `V = p / s`, where `p` falls
//! with the block's RRPV and `s` is its size bucket. SIP learns, on a few
//! sampled sets, which compressed sizes deserve high insertion priority. CAMP
//! runs both; pick it with [`LocalPolicy::Camp`](crate::cache::LocalPolicy).

mod mve;
mod sip;

pub use mve::{mve_rank, mve_rank_with, mve_select_victims, mve_value, MveSelector, MveValue};
pub use sip::{sip_decide, sip_training_step, size_bin, SipConfig, SipController};
