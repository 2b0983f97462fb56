//! Trace-driven simulation of compressed memory hierarchies.
//!
//! * [`compression`]: BΔI line codec.
//! * [`cache`]: compressed set-associative cache with LRU and SRRIP.
//! * [`camp`]: size-aware eviction (MVE) and insertion (SIP) for that cache.
//! * [`vway`]: decoupled tag/data V-Way cache and its global policies.
//! * [`lcp`]: Linearly Compressed Pages for main memory.
//! * [`toggles`]: bit-toggle accounting and energy-control decisions.
//! * [`storage`]: raw storage-cost accounting.
//! * [`harness`]: traces, synthetic workloads, simulation driver and reports.

pub mod cache;
pub mod camp;
pub mod compression;
pub mod harness;
pub mod lcp;
pub mod storage;
pub mod toggles;
pub mod vway;
