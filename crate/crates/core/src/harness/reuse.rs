//! Reuse distances of an address stream.
//!
//! Two measures are kept apart: the request distance counts every access
//! between two uses of an address, the stack distance counts only distinct
//! addresses.

use std::collections::HashMap;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReuseDistance {
    pub request: u64,
    pub stack: u64,
}

struct Fenwick(Vec<i64>);

impl Fenwick {
    fn add(&mut self, mut i: usize, v: i64) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `[0, i)`.
    fn prefix(&self, mut i: usize) -> i64 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Distance to the previous access of the same address, `None` on first use.
pub fn reuse_distances(addrs: &[u64]) -> Vec<Option<ReuseDistance>> {
    // a 1 at position t marks the most recent access of some address
    let mut marks = Fenwick(vec![0; addrs.len() + 1]);
    let mut last: HashMap<u64, usize> = HashMap::new();
    let mut out = Vec::with_capacity(addrs.len());
    for (t, &a) in addrs.iter().enumerate() {
        match last.insert(a, t) {
            Some(p) => {
                let stack = marks.prefix(t) - marks.prefix(p + 1);
                marks.add(p, -1);
                out.push(Some(ReuseDistance {
                    request: (t - p - 1) as u64,
                    stack: stack as u64,
                }));
            }
            None => out.push(None),
        }
        marks.add(t, 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_example() {
        let d = reuse_distances(&[1, 2, 2, 3, 1, 2]);
        assert_eq!(d[0], None);
        assert_eq!(d[2], Some(ReuseDistance { request: 0, stack: 0 }));
        assert_eq!(d[4], Some(ReuseDistance { request: 3, stack: 2 }));
        assert_eq!(d[5], Some(ReuseDistance { request: 2, stack: 2 }));
    }
}
