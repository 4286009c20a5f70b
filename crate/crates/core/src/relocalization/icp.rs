//! Point-to-point ICP over the member points of matched clusters.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float as _;

use super::rigid::estimate_rigid_transform;
use super::{centroid_pairs, RelocParams};
use crate::association::MatchPair;
use crate::geometry::{dist3d, Pose};
use crate::kdtree::KdTree;
use crate::map::ClusterMap;

#[derive(Debug, Clone, PartialEq)]
pub struct FineAlignment {
    pub pose: Pose,
    pub residual_rms: f64,
    /// Accepted ICP iterations.
    pub iterations: usize,
    /// Member points were missing on either side, so `pose` is the
    /// initial guess and `residual_rms` is measured on centroids.
    pub fallback: bool,
}

/// Member points of `ids`, every k-th point of clusters larger than `cap`.
fn stacked_points(map: &ClusterMap, ids: impl Iterator<Item = crate::cluster::ClusterId>, cap: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for id in ids {
        if let Some(c) = map.get(id) {
            let stride = c.points().len().div_ceil(cap.max(1)).max(1);
            out.extend(c.points().iter().step_by(stride).map(|p| p.xyz()));
        }
    }
    out
}

/// Nearest target point for every source point under `pose`, plus the rms
/// of those distances.
fn correspond(pose: &Pose, src: &[[f64; 3]], tree: &KdTree<3>, dst: &[[f64; 3]]) -> (Vec<[f64; 3]>, Vec<[f64; 3]>, f64) {
    let mut moved = Vec::with_capacity(src.len());
    let mut matched = Vec::with_capacity(src.len());
    let mut sum = 0.0;
    for p in src {
        let q = pose.transform_xyz(*p);
        let (k, d) = tree.nearest(&q).expect("non-empty target");
        sum += d * d;
        moved.push(q);
        matched.push(dst[k as usize]);
    }
    (moved, matched, (sum / src.len() as f64).sqrt())
}

/// Centroid rms of `pairs` under `pose`; zero when there are no pairs.
pub fn centroid_residual(pairs: &[MatchPair], local_map: &ClusterMap, global_map: &ClusterMap, pose: &Pose) -> f64 {
    let (_, src, dst) = centroid_pairs(pairs, local_map, global_map);
    if src.is_empty() {
        return 0.0;
    }
    let sum: f64 = src.iter().zip(&dst).map(|(s, d)| dist3d(pose.transform_xyz(*s), *d).powi(2)).sum();
    (sum / src.len() as f64).sqrt()
}

/// Refines `init` (local → global) with point-to-point ICP between the
/// stacked member points of the matched local and global clusters.
///
/// An iteration is accepted only if it does not raise the residual, and
/// the loop stops once the improvement drops below `icp_convergence`, an
/// iteration is rejected, or `icp_max_iterations` is reached.
pub fn fine_align(
    pairs: &[MatchPair],
    local_map: &ClusterMap,
    global_map: &ClusterMap,
    init: &Pose,
    params: &RelocParams,
) -> FineAlignment {
    let src = stacked_points(local_map, pairs.iter().map(|p| p.local), params.icp_max_points_per_cluster);
    let dst = stacked_points(global_map, pairs.iter().map(|p| p.global), usize::MAX);
    if src.is_empty() || dst.is_empty() {
        return FineAlignment {
            pose: *init,
            residual_rms: centroid_residual(pairs, local_map, global_map, init),
            iterations: 0,
            fallback: true,
        };
    }

    let tree = KdTree::<3>::from_points(&dst);
    let mut pose = *init;
    let (mut moved, mut matched, mut residual) = correspond(&pose, &src, &tree, &dst);
    let mut iterations = 0;
    for _ in 0..params.icp_max_iterations {
        let Ok(delta) = estimate_rigid_transform(&moved, &matched) else { break };
        let candidate = delta.compose(&pose).renormalized();
        let (m, t, r) = correspond(&candidate, &src, &tree, &dst);
        if !(r <= residual) {
            break;
        }
        let improvement = residual - r;
        pose = candidate;
        moved = m;
        matched = t;
        residual = r;
        iterations += 1;
        if improvement < params.icp_convergence {
            break;
        }
    }
    FineAlignment { pose, residual_rms: residual, iterations, fallback: false }
}
