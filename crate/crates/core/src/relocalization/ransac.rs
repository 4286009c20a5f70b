//! Hypothesize-and-verify filtering of centroid correspondences.

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::rigid::estimate_rigid_transform;
use super::{centroid_pairs, RelocError, RelocParams};
use crate::association::MatchPair;
use crate::geometry::{dist3d, Pose};
use crate::map::ClusterMap;

fn inliers(pose: &Pose, src: &[[f64; 3]], dst: &[[f64; 3]], threshold: f64) -> Vec<usize> {
    (0..src.len()).filter(|&i| dist3d(pose.transform_xyz(src[i]), dst[i]) < threshold).collect()
}

fn binomial3(n: usize) -> u128 {
    let n = n as u128;
    if n < 3 { 0 } else { n * (n - 1) * (n - 2) / 6 }
}

/// Largest set of pairs whose 3D centroids agree with one rigid transform
/// within `ransac_threshold`.
///
/// Hypotheses come from three-pair samples. When there are no more
/// distinct triples than `ransac_iterations`, every triple is tried in
/// order instead of sampling. Pairs are put in `(local, global)` order
/// first and the sampler is seeded from `params.seed`, so the result is
/// reproducible.
pub fn ransac_filter(
    pairs: &[MatchPair],
    local_map: &ClusterMap,
    global_map: &ClusterMap,
    params: &RelocParams,
) -> Result<Vec<MatchPair>, RelocError> {
    let mut sorted: Vec<MatchPair> = pairs.to_vec();
    sorted.sort_by_key(|p| (p.local, p.global));
    let (kept, src, dst) = centroid_pairs(&sorted, local_map, global_map);
    let n = kept.len();
    if n < 3 {
        return Err(RelocError::InsufficientPairs);
    }

    let mut best: Vec<usize> = Vec::new();
    let consider = |idx: [usize; 3], best: &mut Vec<usize>| {
        let s = [src[idx[0]], src[idx[1]], src[idx[2]]];
        let d = [dst[idx[0]], dst[idx[1]], dst[idx[2]]];
        if let Ok(pose) = estimate_rigid_transform(&s, &d) {
            let found = inliers(&pose, &src, &dst, params.ransac_threshold);
            if found.len() > best.len() {
                *best = found;
            }
        }
    };

    if binomial3(n) <= params.ransac_iterations as u128 {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    consider([i, j, k], &mut best);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        for _ in 0..params.ransac_iterations {
            let s = sample(&mut rng, n, 3);
            consider([s.index(0), s.index(1), s.index(2)], &mut best);
            if best.len() == n {
                break;
            }
        }
    }

    if best.len() < 3 {
        return Err(RelocError::InsufficientPairs);
    }
    // refit on the consensus set and take its inliers
    let s: Vec<[f64; 3]> = best.iter().map(|&i| src[i]).collect();
    let d: Vec<[f64; 3]> = best.iter().map(|&i| dst[i]).collect();
    if let Ok(pose) = estimate_rigid_transform(&s, &d) {
        let refined = inliers(&pose, &src, &dst, params.ransac_threshold);
        if refined.len() >= best.len() {
            best = refined;
        }
    }
    Ok(best.into_iter().map(|i| kept[i]).collect())
}
