mod common;

use proptest::prelude::*;

use campsim::compression::golden::format_golden;
use campsim::compression::{compress_line, decompress_line, CacheLineData, Encoding};

use common::{golden, oracle_size, unit_applies, GOLDEN};

#[test]
fn golden_file_matches_compressor() {
    let vectors = golden();
    assert_eq!(vectors.len(), Encoding::ALL.len());
    for v in &vectors {
        let b = compress_line(&v.line);
        assert_eq!((b.encoding, b.size_bytes()), (v.encoding, v.size_bytes), "{}", v.encoding);
        assert_eq!(v.encoding.compressed_size(64), v.size_bytes);
    }
}

#[test]
fn golden_file_reformats_identically() {
    let body: String = GOLDEN.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    assert_eq!(format_golden(&golden()), body);
}

#[test]
fn oracle_agrees_with_golden_encodings() {
    for v in golden() {
        if v.encoding.is_base_delta() {
            let (k, d) = (v.encoding.base_width().unwrap(), v.encoding.delta_width().unwrap());
            assert!(unit_applies(v.line.as_bytes(), k, d), "{}", v.encoding);
        }
        assert_eq!(oracle_size(v.line.as_bytes()), v.size_bytes);
    }
}

fn line_strategy() -> impl Strategy<Value = CacheLineData> {
    let raw = prop_oneof![Just(32usize), Just(64usize)].prop_flat_map(|n| proptest::collection::vec(any::<u8>(), n));
    // base plus small signed offsets, at a random element width
    let narrow = (prop_oneof![Just(2usize), Just(4), Just(8)], any::<u64>(), proptest::collection::vec(-300i64..300, 32))
        .prop_map(|(k, base, offs)| {
            let mut bytes = Vec::with_capacity(64);
            for o in offs.iter().take(64 / k) {
                bytes.extend_from_slice(&base.wrapping_add(*o as u64).to_le_bytes()[..k]);
            }
            bytes
        });
    prop_oneof![raw, narrow].prop_map(|b| CacheLineData::new(b).unwrap())
}

proptest! {
    #[test]
    fn roundtrip_is_exact(line in line_strategy()) {
        let b = compress_line(&line);
        prop_assert_eq!(decompress_line(&b).unwrap(), line.clone());
        prop_assert!(b.size_bytes() <= line.line_size());
        prop_assert_eq!(b.size_bytes(), oracle_size(line.as_bytes()));
    }
}
