//! Recovering the rigid transform that places a local map in the global map.
//!
//! Associated pairs go through a pairwise distance-consistency filter and a
//! RANSAC pass over 3D centroids, then a closed-form fit on the surviving
//! centroids gives a coarse pose that ICP on member points refines.
//! Every pose here maps local coordinates into the global frame.

mod consistency;
mod icp;
mod ransac;
mod rigid;

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::association::{associate_with_index, AssociationIndex, AssociationParams, MatchPair};
use crate::geometry::Pose;
use crate::map::ClusterMap;

pub use consistency::geometric_consistency_filter;
pub use icp::{centroid_residual, fine_align, FineAlignment};
pub use ransac::ransac_filter;
pub use rigid::estimate_rigid_transform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RelocError {
    #[error("degenerate correspondences")]
    DegenerateCorrespondences,
    #[error("source and destination lengths differ")]
    LengthMismatch,
    #[error("insufficient pairs")]
    InsufficientPairs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocParams {
    /// Tolerance on pairwise distance disagreement, meters.
    pub epsilon: f64,
    pub ransac_threshold: f64,
    pub ransac_iterations: usize,
    /// Fewest pairs allowed to survive any stage.
    pub min_pairs: usize,
    pub icp_max_iterations: usize,
    pub icp_convergence: f64,
    /// Larger local clusters are thinned to about this many points for ICP;
    /// the global side always keeps every point.
    pub icp_max_points_per_cluster: usize,
    pub seed: u64,
    /// Run RANSAC before the consistency filter instead of after it.
    pub ransac_first: bool,
}

impl Default for RelocParams {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            ransac_threshold: 0.5,
            ransac_iterations: 200,
            min_pairs: 4,
            icp_max_iterations: 30,
            icp_convergence: 1e-4,
            icp_max_points_per_cluster: 200,
            seed: 0,
            ransac_first: false,
        }
    }
}

impl RelocParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.epsilon > 0.0) {
            return Err("epsilon must be > 0");
        }
        if !(self.ransac_threshold > 0.0) {
            return Err("ransac_threshold must be > 0");
        }
        if self.ransac_iterations == 0 {
            return Err("ransac_iterations must be > 0");
        }
        if self.min_pairs < 3 {
            return Err("min_pairs must be >= 3");
        }
        if self.icp_max_iterations == 0 {
            return Err("icp_max_iterations must be > 0");
        }
        if self.icp_max_points_per_cluster == 0 {
            return Err("icp_max_points_per_cluster must be >= 1");
        }
        if !(self.icp_convergence > 0.0) {
            return Err("icp_convergence must be > 0");
        }
        Ok(())
    }
}

/// Why a relocalization attempt gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelocFailure {
    NoMatches { pairs: usize },
    ConsistencyCollapse { survivors: usize },
    RansacFailure { survivors: usize },
    DegenerateFit,
}

impl RelocFailure {
    pub fn reason(&self) -> &'static str {
        match self {
            RelocFailure::NoMatches { .. } => "no-matches",
            RelocFailure::ConsistencyCollapse { .. } => "consistency-collapse",
            RelocFailure::RansacFailure { .. } => "ransac-failure",
            RelocFailure::DegenerateFit => "degenerate-fit",
        }
    }
}

impl fmt::Display for RelocFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelocFailure::NoMatches { pairs } | RelocFailure::ConsistencyCollapse { survivors: pairs } | RelocFailure::RansacFailure { survivors: pairs } => {
                write!(f, "{} ({} pairs)", self.reason(), pairs)
            }
            RelocFailure::DegenerateFit => f.write_str(self.reason()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelocResult {
    /// Maps local coordinates into the global frame.
    pub pose: Pose,
    pub inlier_pairs: Vec<MatchPair>,
    pub residual_rms: f64,
    pub coarse_pose: Pose,
    /// Fine alignment had no member points and kept the coarse pose.
    pub fine_fallback: bool,
}

/// Pairs whose clusters exist in both maps, with their 3D centroids.
pub(crate) fn centroid_pairs(
    pairs: &[MatchPair],
    local_map: &ClusterMap,
    global_map: &ClusterMap,
) -> (Vec<MatchPair>, Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let mut kept = Vec::with_capacity(pairs.len());
    let mut src = Vec::with_capacity(pairs.len());
    let mut dst = Vec::with_capacity(pairs.len());
    for p in pairs {
        if let (Some(l), Some(g)) = (local_map.get(p.local), global_map.get(p.global)) {
            kept.push(*p);
            src.push(l.centroid3d());
            dst.push(g.centroid3d());
        }
    }
    (kept, src, dst)
}

/// Closed-form fit over the 3D centroids of already filtered pairs.
///
/// Correspondences are fixed, so iterating would not move the solution.
pub fn coarse_align(pairs: &[MatchPair], local_map: &ClusterMap, global_map: &ClusterMap) -> Result<Pose, RelocError> {
    let (_, src, dst) = centroid_pairs(pairs, local_map, global_map);
    estimate_rigid_transform(&src, &dst)
}

/// Pose of `local_map` in `global_map`, or why it could not be found.
pub fn relocalize(
    local_map: &ClusterMap,
    global_map: &ClusterMap,
    assoc_params: &AssociationParams,
    params: &RelocParams,
) -> Result<RelocResult, RelocFailure> {
    let index = AssociationIndex::new(global_map, assoc_params.search_radius);
    relocalize_with_index(local_map, global_map, &index, assoc_params, params)
}

/// [`relocalize`] with a prepared association index of `global_map`.
pub fn relocalize_with_index(
    local_map: &ClusterMap,
    global_map: &ClusterMap,
    index: &AssociationIndex,
    assoc_params: &AssociationParams,
    params: &RelocParams,
) -> Result<RelocResult, RelocFailure> {
    let min = params.min_pairs.max(3);
    let pairs = associate_with_index(local_map, index, assoc_params);
    if pairs.len() < min {
        return Err(RelocFailure::NoMatches { pairs: pairs.len() });
    }

    let consistent = |p: &[MatchPair]| -> Result<Vec<MatchPair>, RelocFailure> {
        let kept = geometric_consistency_filter(p, local_map, global_map, params.epsilon);
        if kept.len() < min {
            return Err(RelocFailure::ConsistencyCollapse { survivors: kept.len() });
        }
        Ok(kept)
    };
    let ransac = |p: &[MatchPair]| -> Result<Vec<MatchPair>, RelocFailure> {
        match ransac_filter(p, local_map, global_map, params) {
            Ok(kept) if kept.len() >= min => Ok(kept),
            Ok(kept) => Err(RelocFailure::RansacFailure { survivors: kept.len() }),
            Err(_) => Err(RelocFailure::RansacFailure { survivors: 0 }),
        }
    };
    let filtered = if params.ransac_first { consistent(&ransac(&pairs)?)? } else { ransac(&consistent(&pairs)?)? };

    let coarse = coarse_align(&filtered, local_map, global_map).map_err(|_| RelocFailure::DegenerateFit)?;
    let fine = fine_align(&filtered, local_map, global_map, &coarse, params);
    Ok(RelocResult {
        pose: fine.pose,
        inlier_pairs: filtered,
        residual_rms: fine.residual_rms,
        coarse_pose: coarse,
        fine_fallback: fine.fallback,
    })
}
