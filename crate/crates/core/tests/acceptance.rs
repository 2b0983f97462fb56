//! One PASS/FAIL line per acceptance criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line;
//! without `--nocapture` the lines show only when something fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use campsim::cache::{insert_with_eviction, CacheGeometry, CompressedCache, LocalPolicy, NewBlock, RripConfig, SetState};
use campsim::camp::{MveSelector, SipConfig};
use campsim::compression::{compress_line, decompress_line, CacheLineData, Encoding};
use campsim::harness::{size_counterexample, HitMiss, TraceRecord};
use campsim::lcp::{
    batched_fetch, compress_page, line_slot_address, n_avail, BdiPageCodec, LcpGeometry, PageImage, PageLayout,
    PteExtension,
};
use campsim::storage;
use campsim::toggles::{
    ec_decide, mc_transform, toggle_count_dram, toggle_count_onchip, Channel, EcDecision, EcInputs, EcMetric,
    EcParams, FlitStream, McLayout,
};
use campsim::vway::{VwayCache, VwayPolicy};

use common::*;

const FUZZ_LINES: usize = 1_000_000;
const FUZZ_BUDGET: Duration = Duration::from_secs(60);
const LEARNING_BUDGET: Duration = Duration::from_secs(120);
const TOGGLE_BUDGET: Duration = Duration::from_secs(30);
/// Required relative MPKI reduction over the baseline.
const LEARNING_MARGIN: f64 = 0.01;
const LEARNING_ACCESSES: usize = 300_000;
const EC_TOL: f64 = 1e-12;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// sizes at 32-byte lines, in table order
const SIZES_32: [(&str, usize); 9] = [
    ("Zeros", 1),
    ("RepValues", 8),
    ("B8D1", 12),
    ("B8D2", 16),
    ("B8D4", 24),
    ("B4D1", 12),
    ("B4D2", 20),
    ("B2D1", 18),
    ("NoCompr", 32),
];

fn bdi_golden() -> Verdict {
    let vectors = golden();
    let mut seen = Vec::new();
    let mut bad = Vec::new();
    for v in &vectors {
        let half = CacheLineData::new(v.line.as_bytes()[..32].to_vec()).unwrap();
        let want32 = SIZES_32.iter().find(|(n, _)| *n == v.encoding.name()).unwrap().1;
        for (line, size) in [(&v.line, v.size_bytes), (&half, want32)] {
            let b = compress_line(line);
            let back = decompress_line(&b).unwrap();
            if b.encoding != v.encoding || b.size_bytes() != size || &back != line {
                bad.push(format!("{}@{}B got {}/{}", v.encoding, line.line_size(), b.encoding, b.size_bytes()));
            }
        }
        seen.push(v.encoding);
    }
    seen.dedup();
    let all = Encoding::ALL.iter().all(|e| seen.contains(e));
    verdict(
        all && bad.is_empty(),
        format!("{} vectors x 2 line sizes, all encodings covered: {all}, mismatches: {bad:?}", vectors.len()),
    )
}

/// Random bytes, or lines built to sit on and around encoding boundaries.
fn fuzz_line(rng: &mut ChaCha8Rng) -> CacheLineData {
    let size = if rng.gen_bool(0.25) { 32 } else { 64 };
    let mut bytes = vec![0u8; size];
    match rng.gen_range(0..5) {
        0 => rng.fill(&mut bytes[..]),
        1 | 2 => {
            let (k, d) = [(8, 1), (8, 2), (8, 4), (4, 1), (4, 2), (2, 1)][rng.gen_range(0..6)];
            let base: u64 = rng.gen();
            let lim = 1i64 << (8 * d - 1);
            for c in bytes.chunks_mut(k) {
                let v = match rng.gen_range(0..10) {
                    0 => rng.gen_range(-lim..lim) as u64,
                    // one past the delta range
                    1 => base.wrapping_add(if rng.gen() { lim as u64 } else { (-lim - 1) as u64 }),
                    _ => base.wrapping_add(rng.gen_range(-lim..lim) as u64),
                };
                c.copy_from_slice(&v.to_le_bytes()[..k]);
            }
        }
        3 => {
            let v: u64 = rng.gen();
            for c in bytes.chunks_mut(8) {
                c.copy_from_slice(&v.to_le_bytes());
            }
            if rng.gen() {
                let i = rng.gen_range(0..size);
                bytes[i] ^= 1 << rng.gen_range(0..8);
            }
        }
        _ => {
            for _ in 0..rng.gen_range(0..3) {
                let i = rng.gen_range(0..size);
                bytes[i] = rng.gen();
            }
        }
    }
    CacheLineData::new(bytes).unwrap()
}

fn codec_fuzz() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0d1);
    let (mut roundtrip_bad, mut size_bad) = (0usize, 0usize);
    for _ in 0..FUZZ_LINES {
        let line = fuzz_line(&mut rng);
        let b = compress_line(&line);
        if decompress_line(&b).as_ref() != Ok(&line) {
            roundtrip_bad += 1;
        }
        if b.size_bytes() != oracle_size(line.as_bytes()) {
            size_bad += 1;
        }
    }
    let dt = t.elapsed();
    verdict(
        roundtrip_bad == 0 && size_bad == 0 && dt < FUZZ_BUDGET,
        format!("{FUZZ_LINES} lines, roundtrip failures {roundtrip_bad}, non-minimal {size_bad}, {dt:.1?}"),
    )
}

fn storage_totals() -> Verdict {
    let g = CacheGeometry::new(2 << 20, 64, 16);
    let base = storage::baseline(&g, 36);
    let bdi = storage::bdi_segmented(&g, 36);
    let vc = storage::vway_compressed(&g, 36, 2, 8);
    let got = [
        storage::kib(base.tag_store_bytes()),
        storage::kib(bdi.tag_store_bytes()),
        storage::kib(base.total_bytes()),
        storage::kib(bdi.total_bytes()),
        storage::kb(vc.total_bytes()),
    ];
    let want = [84, 256, 2132, 2294, 2556];
    verdict(
        got == want,
        format!("tag stores / totals / V-Way+C: got {got:?}, expected {want:?}"),
    )
}

fn belady_counterexample() -> Verdict {
    let (mve, belady) = size_counterexample();
    let pass = mve == HitMiss { hits: 3, misses: 1 } && belady == HitMiss { hits: 2, misses: 2 };
    verdict(pass, format!("160B set: size-aware {mve:?}, Belady {belady:?}"))
}

fn oracle_geometry() -> CacheGeometry {
    CacheGeometry { tag_factor: 1, ..CacheGeometry::new(16 * 1024, 64, 4) }
}

fn hit_flags(policy: LocalPolicy, addrs: &[u64]) -> Vec<bool> {
    let mut c = CompressedCache::new(oracle_geometry(), policy, RripConfig::default(), SipConfig::default()).unwrap();
    addrs
        .iter()
        .map(|&a| c.access(a, false, Encoding::NoCompr, 64).unwrap().hit)
        .collect()
}

/// Brute-force victims for inserting `need` segments, on a copy of the set.
fn mve_oracle(set: &SetState, need: usize) -> Vec<u64> {
    let max = 7u8;
    let mut e: Vec<Option<(u64, usize, usize, u8)>> = set
        .tags()
        .iter()
        .map(|t| t.valid.then_some((t.tag, t.size_bytes as usize, t.size_segments as usize, t.rrpv)))
        .collect();
    let budget = set.budget_segments();
    let mut used: usize = e.iter().flatten().map(|x| x.2).sum();
    let tag_free = e.iter().any(Option::is_none);
    if tag_free && used + need <= budget {
        return Vec::new();
    }
    let top = e.iter().flatten().map(|x| x.3).max().unwrap();
    for x in e.iter_mut().flatten() {
        x.3 += max - top;
    }
    if used + need <= budget {
        return vec![e.iter().flatten().find(|x| x.3 == max).unwrap().0];
    }
    let bucket = |s: usize| match s {
        0..=7 => 2u64,
        8..=15 => 4,
        16..=31 => 8,
        32..=63 => 16,
        _ => 32,
    };
    let mut out = Vec::new();
    while used + need > budget {
        let mut best: Option<usize> = None;
        for (i, x) in e.iter().enumerate() {
            let Some(x) = x else { continue };
            let better = match best {
                None => true,
                Some(b) => {
                    let y = e[b].unwrap();
                    // (8 - rrpv) / bucket, cross-multiplied; ties to the larger block
                    let lhs = (max as u64 + 1 - x.3 as u64) * bucket(y.1);
                    let rhs = (max as u64 + 1 - y.3 as u64) * bucket(x.1);
                    lhs < rhs || (lhs == rhs && x.2 > y.2)
                }
            };
            if better {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        let x = e[b].take().unwrap();
        used -= x.2;
        out.push(x.0);
    }
    out
}

fn policy_oracles() -> Verdict {
    let g = oracle_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lines = (g.capacity_bytes / g.line_size * 2) as u64;
    let addrs: Vec<u64> = (0..100_000).map(|_| rng.gen_range(0..lines) * 64).collect();
    let mut lru = TextbookLru::new(&g);
    let mut srrip = TextbookSrrip::new(&g);
    let lru_ok = hit_flags(LocalPolicy::Lru, &addrs) == addrs.iter().map(|&a| lru.access(a)).collect::<Vec<_>>();
    let rrip_ok = hit_flags(LocalPolicy::Rrip, &addrs) == addrs.iter().map(|&a| srrip.access(a)).collect::<Vec<_>>();

    let cfg = RripConfig::default();
    let mut set = SetState::new(16, 64);
    let mut sizes = [0usize; 48];
    for s in sizes.iter_mut() {
        *s = rng.gen_range(1..=64);
    }
    let (mut evictions, mut mve_bad) = (0usize, 0usize);
    for t in 0..10_000u64 {
        let tag = rng.gen_range(0..48u64);
        if let Some(i) = set.lookup(tag) {
            set.tags_mut()[i].rrpv = 0;
            continue;
        }
        let size = sizes[tag as usize];
        let segs = size.div_ceil(8);
        let want = mve_oracle(&set, segs);
        let block = NewBlock {
            tag,
            encoding: Encoding::NoCompr,
            size_bytes: size as u16,
            size_segments: segs as u16,
            rrpv: 6,
            lru_stamp: t,
            dirty: false,
        };
        let got: Vec<u64> = insert_with_eviction(&mut set, &block, &mut MveSelector { cfg })
            .unwrap()
            .evicted
            .iter()
            .map(|e| e.tag)
            .collect();
        evictions += usize::from(!want.is_empty());
        mve_bad += usize::from(got != want);
    }
    verdict(
        lru_ok && rrip_ok && mve_bad == 0,
        format!("LRU identical {lru_ok}, SRRIP identical {rrip_ok}, MVE mismatches {mve_bad} over {evictions} evicting inserts"),
    )
}

/// Misses after the first training phase, plus the counters of the first
/// decision when the cache keeps them.
fn local_run(policy: LocalPolicy, trace: &[TraceRecord]) -> (u64, Option<Vec<i64>>) {
    let sip = learning_sip();
    let mut c = CompressedCache::new(learning_geometry(), policy, RripConfig::default(), sip).unwrap();
    let (mut misses, mut first) = (0, None);
    for (n, r) in trace.iter().enumerate() {
        let b = compress_line(&r.data);
        let o = c.access(r.addr, r.op.is_write(), b.encoding, b.size_bytes()).unwrap();
        if n as u64 >= sip.train_len() && !o.hit {
            misses += 1;
        }
        if first.is_none() {
            if let Some(s) = c.sip().filter(|s| s.decisions() == 1) {
                first = Some(s.last_decision_ctrs().to_vec());
            }
        }
    }
    (misses, first)
}

/// Steady-state misses and the G-MVE switch after every decision.
fn vway_run(policy: VwayPolicy, trace: &[TraceRecord]) -> (u64, Vec<usize>, Vec<bool>) {
    let cfg = learning_vway();
    let train = (cfg.train_fraction * cfg.train_period_accesses as f64).round() as u64;
    let mut c = VwayCache::new(learning_geometry(), policy, cfg).unwrap();
    let (mut misses, mut first_bins, mut switch) = (0, Vec::new(), Vec::new());
    for (n, r) in trace.iter().enumerate() {
        let before = c.decisions();
        let b = compress_line(&r.data);
        let o = c.access(r.addr, r.op.is_write(), b.encoding, b.size_bytes()).unwrap();
        if n as u64 >= train && !o.hit {
            misses += 1;
        }
        if c.decisions() > before {
            if before == 0 {
                first_bins = c.prioritized_bins();
            }
            switch.push(c.gmve_enabled());
        }
    }
    (misses, first_bins, switch)
}

fn gain(base: u64, x: u64) -> f64 {
    (base as f64 - x as f64) / base as f64
}

fn sip_learning() -> Verdict {
    let t = Instant::now();
    let trace = small_reuse_trace(LEARNING_ACCESSES);
    let (rrip, _) = local_run(LocalPolicy::Rrip, &trace);
    let (sip, ctrs) = local_run(LocalPolicy::Sip, &trace);
    let ctrs = ctrs.unwrap_or_default();
    // 8-byte blocks land in bin 1, full lines in bin 8
    let sign_ok = ctrs.len() == 8 && ctrs[0] > 0 && ctrs[7] <= 0;
    let (vway, _, _) = vway_run(VwayPolicy::Vway, &trace);
    let (gsip, bins, _) = vway_run(VwayPolicy::Gsip, &trace);
    let bins_ok = bins.contains(&1) && !bins.contains(&7);
    let (g1, g2) = (gain(rrip, sip), gain(vway, gsip));
    let dt = t.elapsed();
    verdict(
        sign_ok && bins_ok && g1 >= LEARNING_MARGIN && g2 >= LEARNING_MARGIN && dt < LEARNING_BUDGET,
        format!(
            "SIP ctrs {ctrs:?}; steady misses rrip {rrip} sip {sip} ({:.1}%); vway {vway} gsip {gsip} ({:.1}%), G-SIP bins {bins:?}; {dt:.1?}",
            100.0 * g1,
            100.0 * g2
        ),
    )
}

fn gcamp_dueling() -> Verdict {
    let hurts = big_reuse_trace(LEARNING_ACCESSES);
    let helps = small_reuse_trace(LEARNING_ACCESSES);
    let (_, _, off) = vway_run(VwayPolicy::Gcamp, &hurts);
    let (_, _, on) = vway_run(VwayPolicy::Gcamp, &helps);
    let pass = !off.is_empty() && off.iter().all(|e| !e) && !on.is_empty() && on.iter().all(|&e| e);
    verdict(pass, format!("G-MVE enabled per decision: hurting workload {off:?}, helping workload {on:?}"))
}

fn narrow_line(rng: &mut ChaCha8Rng, base: u64) -> CacheLineData {
    // deltas from the first element stay within one signed byte
    let w: Vec<u64> = (0..8)
        .map(|i| if i == 0 { base } else { base.wrapping_add(rng.gen_range(-60i64..60) as u64) })
        .collect();
    CacheLineData::from_u64s(&w).unwrap()
}

fn lcp_arithmetic() -> Verdict {
    let g = LcpGeometry::default();
    let pte = PteExtension::default();
    let offset = line_slot_address(&pte, 2, 16, &g).unwrap();
    let m = g.metadata_bytes();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut avail_bad = 0;
    for _ in 0..20 {
        let p = rng.gen_range(256..=4096usize);
        let c_star = rng.gen_range(1..=64usize);
        let want = (p >= 64 * c_star + 64).then(|| (p - 64 * c_star - 64) / 64);
        avail_bad += usize::from(n_avail(p, c_star, &g) != want);
    }
    let base = rng.gen::<u64>() | 1 << 63;
    let mut lines: Vec<_> = (0..64).map(|_| narrow_line(&mut rng, base)).collect();
    for i in [3, 17, 40] {
        let w: Vec<u64> = (0..8).map(|_| rng.gen()).collect();
        lines[i] = CacheLineData::from_u64s(&w).unwrap();
    }
    let page = compress_page(&lines, &BdiPageCodec, &g, false).unwrap();
    let img = PageImage::parse(&page.image()).unwrap();
    let back: Vec<_> = (0..64).map(|i| img.read_line(i, &BdiPageCodec, &g).unwrap()).collect();
    let rt = back == lines && page.lines(&BdiPageCodec).unwrap() == lines;
    verdict(
        offset == 32 && m == 64 && avail_bad == 0 && rt,
        format!("slot 2 at C*=16 -> {offset}, M = {m}B, n_avail mismatches {avail_bad}/20, page image roundtrip {rt}"),
    )
}

fn lcp_batched_fetch() -> Verdict {
    let g = LcpGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = rng.gen::<u64>() | 1 << 63;
    let mut lines: Vec<_> = (0..64).map(|_| narrow_line(&mut rng, base)).collect();
    let w: Vec<u64> = (0..8).map(|_| rng.gen()).collect();
    lines[6] = CacheLineData::from_u64s(&w).unwrap();
    let page = compress_page(&lines, &BdiPageCodec, &g, false).unwrap();
    let fetch = batched_fetch(&page, 5, None);
    let want: Vec<(usize, bool)> = (4..8).map(|j| (j, j != 6)).collect();
    let meta_ok = fetch.iter().all(|&(j, ok)| ok == !page.is_exception(j));
    verdict(
        page.layout == PageLayout::Compressed && page.c_star == 16 && fetch == want && meta_ok,
        format!("C* = {}, fetch of line 5 -> {fetch:?}", page.c_star),
    )
}

fn per_bit_onchip(payload: &[u8], flit: usize, prev: &[u8]) -> u64 {
    let mut padded = payload.to_vec();
    padded.resize(payload.len().div_ceil(flit) * flit, 0);
    let bit = |b: &[u8], i: usize| b[i / 8] >> (i % 8) & 1;
    let mut last = prev.to_vec();
    let mut n = 0;
    for f in padded.chunks(flit) {
        for i in 0..flit * 8 {
            n += u64::from(bit(f, i) != bit(&last, i));
        }
        last = f.to_vec();
    }
    n
}

fn ec_oracle(cr: f64, t0: f64, t1: f64, bu: f64, ed2: bool) -> (f64, bool) {
    let a = if bu > 0.5 { cr / (1.0 - bu) } else { cr };
    let b = t0 / t1;
    let v = if ed2 { a * b * b } else { a * b };
    (v, v > 1.0)
}

fn toggles() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut count_bad = 0;
    for _ in 0..100_000 {
        let flit = [4, 8, 16, 32][rng.gen_range(0..4)];
        let mut payload = vec![0u8; rng.gen_range(1..=80)];
        rng.fill(&mut payload[..]);
        let mut prev = vec![0u8; flit];
        rng.fill(&mut prev[..]);
        let s = FlitStream::new(&payload, flit).unwrap();
        let zeros: u64 = payload.iter().map(|b| (0..8).filter(|i| b >> i & 1 == 0).count() as u64).sum();
        if toggle_count_onchip(&s, &prev).unwrap() != per_bit_onchip(&payload, flit, &prev) || toggle_count_dram(&payload) != zeros {
            count_bad += 1;
        }
    }

    // (CR, T0, T1, BU, expected compress under ED, under ED2)
    let table = [
        (2.0, 100, 100, 0.0, true, true),
        (1.0, 100, 200, 0.0, false, false),
        (1.5, 100, 200, 0.0, false, false),
        (1.5, 100, 200, 0.6, true, false),
    ];
    let mut ec_bad = Vec::new();
    for (i, &(cr, t0, t1, bu, ed, ed2)) in table.iter().enumerate() {
        for (metric, want) in [(EcMetric::Ed, ed), (EcMetric::Ed2, ed2)] {
            let got = ec_decide(EcInputs { t0, t1, cr, bu }, EcParams { metric, ..EcParams::default() });
            let (_, formula) = ec_oracle(cr, t0 as f64, t1 as f64, bu, metric == EcMetric::Ed2);
            if (got == EcDecision::SendCompressed) != want || formula != want {
                ec_bad.push((i, metric));
            }
        }
    }
    let worked = [
        ec_oracle(1.5, 1.0, 2.0, 0.0, false).0,
        ec_oracle(1.5, 1.0, 2.0, 0.0, true).0,
        ec_oracle(1.5, 1.0, 2.0, 0.6, false).0 * 2.0,
    ];
    let worked_ok = worked.iter().zip([0.75, 0.375, 3.75]).all(|(a, b)| (a - b).abs() < EC_TOL);

    let mut mc_worse = 0;
    for seed in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + seed);
        let base = r.gen::<u64>() | 1 << 63;
        let stream: Vec<_> = (0..64).map(|_| narrow_line(&mut r, base)).collect();
        let total = |layout| {
            let mut ch = Channel::new(32).unwrap();
            for l in &stream {
                let b = compress_line(l);
                assert_eq!(b.encoding, Encoding::Base8Delta1);
                ch.send(&mc_transform(&b, layout));
            }
            ch.toggles()
        };
        mc_worse += usize::from(total(McLayout::Consolidated) > total(McLayout::Scattered));
    }
    let dt = t.elapsed();
    verdict(
        count_bad == 0 && ec_bad.is_empty() && worked_ok && mc_worse == 0 && dt < TOGGLE_BUDGET,
        format!(
            "count mismatches {count_bad}/100000, EC mismatches {ec_bad:?}, ED/ED2/A {worked:?}, consolidated worse on {mc_worse}/100 seeds; {dt:.1?}"
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("bdi golden sizes", bdi_golden),
        ("codec roundtrip fuzz", codec_fuzz),
        ("storage overhead", storage_totals),
        ("belady counterexample", belady_counterexample),
        ("policy oracles", policy_oracles),
        ("sip/g-sip learning", sip_learning),
        ("g-camp dueling", gcamp_dueling),
        ("lcp arithmetic", lcp_arithmetic),
        ("lcp batched fetch", lcp_batched_fetch),
        ("toggle accounting", toggles),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {}", i + 1, v.detail);
        if !v.pass {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
