//! Intersection of strictly increasing `u32` lists.
//!
//! Pairs of similar length are merged linearly; when one side is much
//! shorter its elements are located in the longer one by galloping search.

/// Length ratio above which galloping beats a linear merge.
const GALLOP_RATIO: usize = 16;

/// Writes `a ∩ b` into `out` (cleared first).
pub fn intersect_into(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.is_empty() {
        return;
    }
    if large.len() / small.len() >= GALLOP_RATIO {
        gallop(small, large, out);
    } else {
        merge(small, large, out);
    }
}

fn merge(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        if x < y {
            i += 1;
        } else if x > y {
            j += 1;
        } else {
            out.push(x);
            i += 1;
            j += 1;
        }
    }
}

fn gallop(small: &[u32], large: &[u32], out: &mut Vec<u32>) {
    let mut base = 0;
    for &x in small {
        let rest = &large[base..];
        // exponential probe for an upper bound, then binary search inside it
        let mut hi = 1;
        while hi < rest.len() && rest[hi] < x {
            hi *= 2;
        }
        let lo = hi / 2;
        let hi = (hi + 1).min(rest.len());
        match rest[lo..hi].binary_search(&x) {
            Ok(p) => {
                out.push(x);
                base += lo + p + 1;
            }
            Err(p) => base += lo + p,
        }
        if base >= large.len() {
            break;
        }
    }
}

/// First index `>= from` whose element is `>= target` (galloping).
pub fn seek(list: &[u32], from: usize, target: u32) -> usize {
    let rest = &list[from..];
    let mut hi = 1;
    while hi < rest.len() && rest[hi] < target {
        hi *= 2;
    }
    let lo = hi / 2;
    let hi = (hi + 1).min(rest.len());
    from + lo + rest[lo..hi].partition_point(|&x| x < target)
}

/// Reusable buffers for k-way intersection.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    order: Vec<usize>,
    acc: Vec<u32>,
    tmp: Vec<u32>,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intersects all `lists`, shortest first, and returns the result.
    /// An empty `lists` yields an empty result.
    pub fn intersect_all<'s>(&'s mut self, lists: &[&[u32]]) -> &'s [u32] {
        self.acc.clear();
        if lists.is_empty() {
            return &self.acc;
        }
        self.order.clear();
        self.order.extend(0..lists.len());
        self.order.sort_unstable_by_key(|&i| lists[i].len());
        self.acc.extend_from_slice(lists[self.order[0]]);
        for &i in &self.order[1..] {
            if self.acc.is_empty() {
                break;
            }
            intersect_into(&self.acc, lists[i], &mut self.tmp);
            std::mem::swap(&mut self.acc, &mut self.tmp);
        }
        &self.acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn naive(a: &[u32], b: &[u32]) -> Vec<u32> {
        let b: BTreeSet<_> = b.iter().collect();
        a.iter().copied().filter(|x| b.contains(x)).collect()
    }

    #[test]
    fn small_cases() {
        let mut out = Vec::new();
        intersect_into(&[1, 3, 5], &[2, 3, 4, 5], &mut out);
        assert_eq!(out, [3, 5]);
        intersect_into(&[], &[1, 2], &mut out);
        assert!(out.is_empty());
        let big: Vec<u32> = (0..1000).collect();
        intersect_into(&[0, 17, 999, 1000], &big, &mut out);
        assert_eq!(out, [0, 17, 999]);
    }

    #[test]
    fn k_way() {
        let mut s = Scratch::new();
        let a = [1u32, 2, 3, 4];
        let b = [2u32, 3, 4];
        let c = [3u32, 4, 9];
        assert_eq!(s.intersect_all(&[&a, &b, &c]), &[3, 4]);
        assert!(s.intersect_all(&[]).is_empty());
        assert_eq!(s.intersect_all(&[&a]), &a);
    }

    #[test]
    fn seek_positions() {
        let l = [1u32, 3, 5, 7, 9, 11];
        assert_eq!(seek(&l, 0, 0), 0);
        assert_eq!(seek(&l, 0, 7), 3);
        assert_eq!(seek(&l, 2, 8), 4);
        assert_eq!(seek(&l, 0, 12), 6);
        assert_eq!(seek(&l, 6, 1), 6);
    }

    proptest! {
        #[test]
        fn matches_naive(a in prop::collection::btree_set(0u32..2000, 0..200),
                         b in prop::collection::btree_set(0u32..2000, 0..20)) {
            let a: Vec<u32> = a.into_iter().collect();
            let b: Vec<u32> = b.into_iter().collect();
            let mut out = Vec::new();
            intersect_into(&a, &b, &mut out);
            prop_assert_eq!(&out, &naive(&a, &b));
            intersect_into(&b, &a, &mut out);
            prop_assert_eq!(&out, &naive(&a, &b));
        }
    }
}
