//! Pole/trunk cluster extraction from a labeled frame.
//!
//! Landmark points are split by label, grouped into connected components
//! under a fixed 3D distance, and each surviving group becomes a cluster
//! whose label is decided by a vote over its member points.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float as _;
use thiserror::Error;

use crate::cluster::{Cluster, ClusterId, Frame, LabeledPoint, SemanticLabel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionParams {
    /// Maximum 3D gap between neighbouring points of one object, meters.
    pub cluster_distance: f64,
    /// Groups with fewer points are dropped.
    pub min_points: usize,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self { cluster_distance: 0.5, min_points: 10 }
    }
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        if !(self.cluster_distance > 0.0) || !self.cluster_distance.is_finite() {
            return Err(ExtractionError::InvalidParams("cluster_distance must be > 0"));
        }
        if self.min_points == 0 {
            return Err(ExtractionError::InvalidParams("min_points must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("no landmark label")]
    NoLandmarkLabel,
    #[error("invalid extraction parameters: {0}")]
    InvalidParams(&'static str),
}

/// The pole and trunk points of `frame`, in input order.
pub fn filter_landmark_points(frame: &Frame) -> Vec<LabeledPoint> {
    frame.points.iter().filter(|p| p.label.is_landmark()).copied().collect()
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so component representatives are stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of `points` under `dist3d <= cluster_distance`.
///
/// Components smaller than `min_points` are dropped. Groups are ordered by
/// their first member's input index and keep input order internally.
/// Non-finite points are ignored.
pub fn euclidean_cluster(points: &[LabeledPoint], params: &ExtractionParams) -> Vec<Vec<LabeledPoint>> {
    let d = params.cluster_distance;
    if points.is_empty() || !(d > 0.0) {
        return Vec::new();
    }
    let d2 = d * d;
    let cell_of = |p: &LabeledPoint| -> (i64, i64, i64) {
        ((p.x / d).floor() as i64, (p.y / d).floor() as i64, (p.z / d).floor() as i64)
    };

    let mut grid: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        if p.is_finite() {
            grid.entry(cell_of(p)).or_default().push(i);
        }
    }

    let mut sets = DisjointSet::new(points.len());
    for (&(cx, cy, cz), members) in &grid {
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(other) = grid.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &i in members {
                        for &j in other {
                            if j <= i {
                                continue;
                            }
                            let (a, b) = (&points[i], &points[j]);
                            let (ex, ey, ez) = (a.x - b.x, a.y - b.y, a.z - b.z);
                            if ex * ex + ey * ey + ez * ez <= d2 {
                                sets.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<LabeledPoint>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        if p.is_finite() {
            let root = sets.find(i);
            groups.entry(root).or_default().push(*p);
        }
    }
    groups.into_values().filter(|g| g.len() >= params.min_points).collect()
}

/// Majority label among the pole and trunk points; ties go to pole.
pub fn vote_label(points: &[LabeledPoint]) -> Result<SemanticLabel, ExtractionError> {
    let poles = points.iter().filter(|p| p.label == SemanticLabel::Pole).count();
    let trunks = points.iter().filter(|p| p.label == SemanticLabel::Trunk).count();
    match (poles, trunks) {
        (0, 0) => Err(ExtractionError::NoLandmarkLabel),
        (p, t) if p >= t => Ok(SemanticLabel::Pole),
        _ => Ok(SemanticLabel::Trunk),
    }
}

fn cmp_xyz(a: &LabeledPoint, b: &LabeledPoint) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)).then(a.label.cmp(&b.label))
}

/// Extracts pole and trunk clusters from one frame.
///
/// Each label class is clustered on its own. Member points are stored in
/// lexicographic order and clusters are sorted by 2D centroid, with ids
/// `0..n` assigned in that order, so the result does not depend on the
/// order of points in the frame.
pub fn extract_clusters(frame: &Frame, params: &ExtractionParams) -> Vec<Cluster> {
    let landmark = filter_landmark_points(frame);
    let mut clusters = Vec::new();
    for class in [SemanticLabel::Pole, SemanticLabel::Trunk] {
        let class_points: Vec<LabeledPoint> = landmark.iter().filter(|p| p.label == class).copied().collect();
        for mut group in euclidean_cluster(&class_points, params) {
            let Ok(label) = vote_label(&group) else { continue };
            group.sort_by(cmp_xyz);
            if let Ok(c) = Cluster::new(ClusterId(0), label, group) {
                clusters.push(c);
            }
        }
    }
    clusters.sort_by(|a, b| {
        let (ca, cb) = (a.centroid2d(), b.centroid2d());
        ca[0].total_cmp(&cb[0]).then(ca[1].total_cmp(&cb[1])).then(a.label().cmp(&b.label()))
    });
    for (i, c) in clusters.iter_mut().enumerate() {
        c.set_id(ClusterId(i as u64));
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn blob(cx: f64, cy: f64, n: usize, label: SemanticLabel) -> Vec<LabeledPoint> {
        (0..n).map(|i| LabeledPoint::new(cx + 0.01 * (i % 5) as f64, cy, 0.1 * i as f64, label)).collect()
    }

    #[test]
    fn filter_examples() {
        let mut pts = blob(0.0, 0.0, 3, SemanticLabel::Pole);
        pts.extend(blob(5.0, 0.0, 2, SemanticLabel::Other(40)));
        assert_eq!(filter_landmark_points(&Frame::new(0.0, pts)).len(), 3);
        let other = Frame::new(0.0, blob(0.0, 0.0, 4, SemanticLabel::Other(50)));
        assert!(filter_landmark_points(&other).is_empty());
    }

    #[test]
    fn two_blobs_two_groups() {
        let mut pts = blob(0.0, 0.0, 20, SemanticLabel::Pole);
        pts.extend(blob(5.0, 0.0, 20, SemanticLabel::Pole));
        let groups = euclidean_cluster(&pts, &ExtractionParams::default());
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.len() == 20));
    }

    #[test]
    fn undersized_blob_dropped() {
        let pts = blob(0.0, 0.0, 5, SemanticLabel::Pole);
        assert!(euclidean_cluster(&pts, &ExtractionParams::default()).is_empty());
    }

    #[test]
    fn vote_examples() {
        let mut pts = blob(0.0, 0.0, 60, SemanticLabel::Trunk);
        pts.extend(blob(0.0, 0.0, 40, SemanticLabel::Pole));
        assert_eq!(vote_label(&pts), Ok(SemanticLabel::Trunk));
        let mut tie = blob(0.0, 0.0, 50, SemanticLabel::Trunk);
        tie.extend(blob(0.0, 0.0, 50, SemanticLabel::Pole));
        assert_eq!(vote_label(&tie), Ok(SemanticLabel::Pole));
        assert_eq!(vote_label(&blob(0.0, 0.0, 3, SemanticLabel::Other(1))), Err(ExtractionError::NoLandmarkLabel));
        assert_eq!(vote_label(&[]), Err(ExtractionError::NoLandmarkLabel));
    }

    #[test]
    fn extract_pole_and_trunk() {
        assert!(extract_clusters(&Frame::new(0.0, vec![]), &ExtractionParams::default()).is_empty());
        let mut pts = blob(3.0, 0.0, 20, SemanticLabel::Trunk);
        pts.extend(blob(-3.0, 1.0, 20, SemanticLabel::Pole));
        pts.extend(blob(0.0, 0.0, 30, SemanticLabel::Other(40)));
        let clusters = extract_clusters(&Frame::new(0.0, pts), &ExtractionParams::default());
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].label(), SemanticLabel::Pole);
        assert_eq!(clusters[1].label(), SemanticLabel::Trunk);
        assert_eq!(clusters[0].id(), ClusterId(0));
        assert_eq!(clusters[1].id(), ClusterId(1));
    }

    #[test]
    fn touching_pole_and_trunk_stay_separate() {
        let mut pts = blob(0.0, 0.0, 20, SemanticLabel::Trunk);
        pts.extend(blob(0.05, 0.0, 20, SemanticLabel::Pole));
        let clusters = extract_clusters(&Frame::new(0.0, pts), &ExtractionParams::default());
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn params_validation() {
        assert!(ExtractionParams::default().validate().is_ok());
        assert!(ExtractionParams { cluster_distance: 0.0, ..Default::default() }.validate().is_err());
        assert!(ExtractionParams { min_points: 0, ..Default::default() }.validate().is_err());
    }
}
