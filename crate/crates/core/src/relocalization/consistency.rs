//! Pairwise geometric consistency of cluster correspondences.

use alloc::vec::Vec;

use crate::association::MatchPair;
use crate::geometry::dist2d;
use crate::map::ClusterMap;

/// Largest mutually consistent subset of `pairs` found by greedy clique
/// growth.
///
/// Two pairs are consistent when the distance between their local clusters
/// and the distance between their global clusters differ by at most
/// `epsilon` (planar centroids). A clique is grown from every pair in turn,
/// always adding the candidate with most consistent partners among the
/// remaining candidates; the largest clique wins. Pairs are put in
/// canonical `(local, global)` order first, so the result does not depend
/// on input order. Fewer than two pairs are returned unchanged.
pub fn geometric_consistency_filter(
    pairs: &[MatchPair],
    local_map: &ClusterMap,
    global_map: &ClusterMap,
    epsilon: f64,
) -> Vec<MatchPair> {
    let mut sorted: Vec<MatchPair> = pairs.to_vec();
    sorted.sort_by_key(|p| (p.local, p.global));
    sorted.dedup_by_key(|p| (p.local, p.global));
    if sorted.len() < 2 {
        return sorted;
    }

    let pos: Vec<Option<([f64; 2], [f64; 2])>> = sorted
        .iter()
        .map(|p| Some((local_map.get(p.local)?.centroid2d(), global_map.get(p.global)?.centroid2d())))
        .collect();
    let n = sorted.len();
    let mut adj = alloc::vec![false; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (Some((li, gi)), Some((lj, gj))) = (pos[i], pos[j]) else { continue };
            let ok = (dist2d(li, lj) - dist2d(gi, gj)).abs() <= epsilon;
            adj[i * n + j] = ok;
            adj[j * n + i] = ok;
        }
    }

    let mut best: Vec<usize> = Vec::new();
    for seed in 0..n {
        if pos[seed].is_none() {
            continue;
        }
        let mut clique = alloc::vec![seed];
        let mut candidates: Vec<usize> = (0..n).filter(|&j| adj[seed * n + j]).collect();
        while !candidates.is_empty() {
            let pick = *candidates
                .iter()
                .max_by_key(|&&c| {
                    let degree = candidates.iter().filter(|&&o| adj[c * n + o]).count();
                    // max_by_key keeps the last maximum; reverse index for lowest-index ties
                    (degree, usize::MAX - c)
                })
                .expect("non-empty");
            clique.push(pick);
            candidates.retain(|&c| c != pick && adj[pick * n + c]);
        }
        if clique.len() > best.len() {
            best = clique;
        }
    }
    best.sort_unstable();
    best.into_iter().map(|i| sorted[i]).collect()
}
