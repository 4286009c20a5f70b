//! Registering per-frame clusters into global and local maps.

use alloc::vec::Vec;

use thiserror::Error;

use crate::cluster::{Cluster, ClusterId};
use crate::geometry::Pose;
use crate::map::ClusterMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationParams {
    /// An incoming cluster whose 2D centroid lies within this distance of a
    /// map cluster is merged into it, meters.
    pub merge_radius: f64,
    /// Only merge into a cluster that already carries the same label.
    pub strict_labels: bool,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self { merge_radius: 1.0, strict_labels: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistrationError {
    #[error("invalid pose")]
    InvalidPose,
    #[error("merge_radius must be > 0")]
    InvalidParams,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegistrationStats {
    pub merged: usize,
    pub inserted: usize,
    /// Map id each incoming cluster ended up in, in input order.
    pub assignments: Vec<ClusterId>,
}

/// Maps every member point and centroid of `clusters` through `pose`.
pub fn transform_clusters(clusters: &[Cluster], pose: &Pose) -> Vec<Cluster> {
    clusters.iter().map(|c| c.map_positions(|p| pose.transform_xyz(p))).collect()
}

/// Registers one frame's clusters, posed by `pose`, into `map`.
///
/// Each cluster is merged into its nearest map cluster within
/// `merge_radius`; the map cluster keeps its id and label, so the incoming
/// cluster effectively adopts the neighbour's label. Clusters with no such
/// neighbour are inserted under new ids. Clusters earlier in the same frame
/// are visible to later ones.
pub fn register_frame(
    map: &mut ClusterMap,
    frame_clusters: &[Cluster],
    pose: &Pose,
    params: &RegistrationParams,
) -> Result<RegistrationStats, RegistrationError> {
    if !pose.is_valid() {
        return Err(RegistrationError::InvalidPose);
    }
    if !(params.merge_radius > 0.0) {
        return Err(RegistrationError::InvalidParams);
    }
    let mut stats = RegistrationStats::default();
    for cluster in transform_clusters(frame_clusters, pose) {
        let query = cluster.centroid2d();
        let nearest = if params.strict_labels {
            map.nearest_matching(query, |c| c.label() == cluster.label())
        } else {
            map.nearest_cluster(query)
        };
        match nearest {
            Some((id, d)) if d <= params.merge_radius => {
                map.merge_into(id, &cluster);
                stats.merged += 1;
                stats.assignments.push(id);
            }
            _ => {
                let id = map.insert(cluster);
                stats.inserted += 1;
                stats.assignments.push(id);
            }
        }
    }
    map.refresh_index();
    Ok(stats)
}

/// A fresh map holding one frame's clusters posed by `pose`.
pub fn build_local_map(frame_clusters: &[Cluster], pose: &Pose) -> ClusterMap {
    ClusterMap::from_clusters(transform_clusters(frame_clusters, pose))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{LabeledPoint, SemanticLabel};
    use alloc::vec;
    use nalgebra::Vector3;

    fn cluster(x: f64, y: f64, label: SemanticLabel) -> Cluster {
        let pts = (0..4).map(|i| LabeledPoint::new(x, y, i as f64, label)).collect();
        Cluster::new(ClusterId(0), label, pts).unwrap()
    }

    #[test]
    fn transform_identity_and_translation() {
        let cs = vec![cluster(1.0, 2.0, SemanticLabel::Pole)];
        assert_eq!(transform_clusters(&cs, &Pose::identity()), cs);
        let moved = transform_clusters(&cs, &Pose::from_translation(1.0, 2.0, 0.0));
        assert_eq!(moved[0].centroid3d(), [2.0, 4.0, 1.5]);
    }

    #[test]
    fn first_frame_initializes_map() {
        let mut map = ClusterMap::new();
        let cs = vec![cluster(0.0, 0.0, SemanticLabel::Pole), cluster(10.0, 0.0, SemanticLabel::Trunk)];
        let stats = register_frame(&mut map, &cs, &Pose::identity(), &RegistrationParams::default()).unwrap();
        assert_eq!((stats.inserted, stats.merged), (2, 0));
        assert_eq!(map.len(), 2);
    }

    #[test]
    fn close_cluster_merges_far_cluster_inserts() {
        let mut map = ClusterMap::new();
        let params = RegistrationParams::default();
        register_frame(&mut map, &[cluster(0.0, 0.0, SemanticLabel::Pole)], &Pose::identity(), &params).unwrap();
        let s = register_frame(&mut map, &[cluster(0.2, 0.0, SemanticLabel::Trunk)], &Pose::identity(), &params).unwrap();
        assert_eq!((s.merged, map.len()), (1, 1));
        // adopted the map cluster's label
        assert_eq!(map.get(s.assignments[0]).unwrap().label(), SemanticLabel::Pole);
        let s = register_frame(&mut map, &[cluster(20.0, 0.0, SemanticLabel::Pole)], &Pose::identity(), &params).unwrap();
        assert_eq!((s.inserted, map.len()), (1, 2));
    }

    #[test]
    fn strict_mode_keeps_labels_apart() {
        let mut map = ClusterMap::new();
        let params = RegistrationParams { strict_labels: true, ..Default::default() };
        register_frame(&mut map, &[cluster(0.0, 0.0, SemanticLabel::Pole)], &Pose::identity(), &params).unwrap();
        let s = register_frame(&mut map, &[cluster(0.2, 0.0, SemanticLabel::Trunk)], &Pose::identity(), &params).unwrap();
        assert_eq!((s.inserted, map.len()), (1, 2));
        let s = register_frame(&mut map, &[cluster(0.1, 0.0, SemanticLabel::Trunk)], &Pose::identity(), &params).unwrap();
        assert_eq!(s.merged, 1);
    }

    #[test]
    fn invalid_pose_rejected() {
        let mut map = ClusterMap::new();
        let bad = Pose::from_quaternion_unchecked(Vector3::zeros(), 0.0, 0.0, 0.5, 0.5);
        let r = register_frame(&mut map, &[], &bad, &RegistrationParams::default());
        assert_eq!(r, Err(RegistrationError::InvalidPose));
    }

    #[test]
    fn local_map_sizes() {
        assert!(build_local_map(&[], &Pose::identity()).is_empty());
        let cs = vec![cluster(0.0, 0.0, SemanticLabel::Pole), cluster(3.0, 0.0, SemanticLabel::Pole)];
        assert_eq!(build_local_map(&cs, &Pose::identity()).len(), 2);
    }
}
