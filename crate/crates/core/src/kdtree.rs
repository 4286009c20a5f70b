//! A static k-d tree over `K`-dimensional `f64` points.
//!
//! Nodes live in a flat array ordered as an implicit balanced tree: each
//! subtree occupies a contiguous range whose middle element is the splitting
//! node. Every point carries a `u64` key; nearest-neighbour ties are broken
//! toward the lowest key.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float as _;

#[derive(Debug, Clone)]
pub struct KdTree<const K: usize> {
    points: Vec<[f64; K]>,
    keys: Vec<u64>,
}

impl<const K: usize> Default for KdTree<K> {
    fn default() -> Self {
        Self { points: Vec::new(), keys: Vec::new() }
    }
}

#[inline]
fn sq_dist<const K: usize>(a: &[f64; K], b: &[f64; K]) -> f64 {
    let mut s = 0.0;
    for i in 0..K {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

impl<const K: usize> KdTree<K> {
    pub fn build(entries: impl IntoIterator<Item = ([f64; K], u64)>) -> Self {
        let mut items: Vec<([f64; K], u64)> = entries.into_iter().collect();
        build_recursive(&mut items, 0);
        let (points, keys) = items.into_iter().unzip();
        Self { points, keys }
    }

    /// Builds a tree keyed by each point's index in `points`.
    pub fn from_points(points: &[[f64; K]]) -> Self {
        Self::build(points.iter().enumerate().map(|(i, p)| (*p, i as u64)))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keys of every point within `radius` (inclusive) of `query`, unordered.
    pub fn within_radius(&self, query: &[f64; K], radius: f64) -> Vec<u64> {
        let mut out = Vec::new();
        self.for_each_within(query, radius, |key, _| out.push(key));
        out
    }

    /// Calls `visit(key, squared_distance)` for every point within `radius`.
    pub fn for_each_within(&self, query: &[f64; K], radius: f64, mut visit: impl FnMut(u64, f64)) {
        if self.points.is_empty() || !(radius >= 0.0) {
            return;
        }
        let r2 = radius * radius;
        let mut stack: Vec<(usize, usize, usize)> = Vec::with_capacity(64);
        stack.push((0, self.points.len(), 0));
        while let Some((lo, hi, depth)) = stack.pop() {
            if lo >= hi {
                continue;
            }
            let mid = lo + (hi - lo) / 2;
            let axis = depth % K;
            let p = &self.points[mid];
            let d2 = sq_dist(p, query);
            if d2 <= r2 {
                visit(self.keys[mid], d2);
            }
            let diff = query[axis] - p[axis];
            // left subtree holds coordinates <= split, right holds >= split
            if diff <= radius {
                stack.push((lo, mid, depth + 1));
            }
            if diff >= -radius {
                stack.push((mid + 1, hi, depth + 1));
            }
        }
    }

    /// Nearest point as `(key, distance)`; ties go to the lowest key.
    pub fn nearest(&self, query: &[f64; K]) -> Option<(u64, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best: (u64, f64) = (u64::MAX, f64::INFINITY);
        self.nearest_rec(0, self.points.len(), 0, query, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_rec(&self, lo: usize, hi: usize, depth: usize, query: &[f64; K], best: &mut (u64, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = depth % K;
        let p = &self.points[mid];
        let d2 = sq_dist(p, query);
        let key = self.keys[mid];
        if d2 < best.1 || (d2 == best.1 && key < best.0) {
            *best = (key, d2);
        }
        let diff = query[axis] - p[axis];
        let (first, second) = if diff <= 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.nearest_rec(first.0, first.1, depth + 1, query, best);
        // `<=` keeps equal-distance candidates with a lower key reachable
        if diff * diff <= best.1 {
            self.nearest_rec(second.0, second.1, depth + 1, query, best);
        }
    }
}

fn build_recursive<const K: usize>(items: &mut [([f64; K], u64)], depth: usize) {
    if items.len() <= 1 {
        return;
    }
    let axis = depth % K;
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
    let (left, rest) = items.split_at_mut(mid);
    build_recursive(left, depth + 1);
    build_recursive(&mut rest[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[[f64; 3]], q: &[f64; 3]) -> (u64, f64) {
        let mut best = (u64::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, q);
            if d < best.1 {
                best = (i as u64, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    #[test]
    fn empty_tree() {
        let t: KdTree<2> = KdTree::default();
        assert!(t.nearest(&[0.0, 0.0]).is_none());
        assert!(t.within_radius(&[0.0, 0.0], 10.0).is_empty());
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 17, 300] {
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0)])
                .collect();
            let tree = KdTree::from_points(&pts);
            for _ in 0..50 {
                let q = [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-6.0..6.0)];
                let r = rng.random_range(0.0..40.0);
                let mut got = tree.within_radius(&q, r);
                got.sort_unstable();
                let want: Vec<u64> = (0..n as u64).filter(|&i| sq_dist(&pts[i as usize], &q) <= r * r).collect();
                assert_eq!(got, want);
                let (k, d) = tree.nearest(&q).unwrap();
                let (bk, bd) = brute_nearest(&pts, &q);
                assert_eq!(k, bk);
                assert_eq!(d, bd);
            }
        }
    }

    #[test]
    fn nearest_tie_goes_to_lowest_key() {
        let tree = KdTree::build([([1.0, 0.0], 9), ([-1.0, 0.0], 4), ([0.0, 1.0], 6), ([0.0, -1.0], 5)]);
        assert_eq!(tree.nearest(&[0.0, 0.0]), Some((4, 1.0)));
        let dup = KdTree::build([([2.0, 2.0], 3), ([2.0, 2.0], 1), ([2.0, 2.0], 2)]);
        assert_eq!(dup.nearest(&[0.0, 0.0]).unwrap().0, 1);
    }
}
