//! Labeled points, frames and semantic clusters.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Semantic class of a LiDAR return.
///
/// Only [`SemanticLabel::Pole`] and [`SemanticLabel::Trunk`] are landmark
/// labels; every other class is carried as its raw category id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemanticLabel {
    Pole,
    Trunk,
    Other(u16),
}

impl SemanticLabel {
    pub fn is_landmark(self) -> bool {
        matches!(self, SemanticLabel::Pole | SemanticLabel::Trunk)
    }

    /// Short lowercase name; `Other` renders as `other:<id>`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pole" => Some(SemanticLabel::Pole),
            "trunk" => Some(SemanticLabel::Trunk),
            _ => s.strip_prefix("other:").and_then(|id| id.parse().ok()).map(SemanticLabel::Other),
        }
    }
}

impl fmt::Display for SemanticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticLabel::Pole => f.write_str("pole"),
            SemanticLabel::Trunk => f.write_str("trunk"),
            SemanticLabel::Other(id) => write!(f, "other:{id}"),
        }
    }
}

/// One entry of a [`LabelDictionary`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEntry {
    pub class_id: u16,
    pub name: String,
    pub label: SemanticLabel,
}

/// Maps raw per-point class ids onto semantic labels.
///
/// Class ids not present in the dictionary decode to `Other(id)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelDictionary {
    entries: Vec<LabelEntry>,
}

/// Class ids of the default dictionary (SemanticKITTI numbering).
pub mod class_ids {
    pub const UNLABELED: u16 = 0;
    pub const CAR: u16 = 10;
    pub const BICYCLE: u16 = 11;
    pub const PERSON: u16 = 30;
    pub const ROAD: u16 = 40;
    pub const SIDEWALK: u16 = 48;
    pub const BUILDING: u16 = 50;
    pub const VEGETATION: u16 = 70;
    pub const TRUNK: u16 = 71;
    pub const POLE: u16 = 80;
}

impl Default for LabelDictionary {
    /// Ten urban categories with SemanticKITTI class ids.
    fn default() -> Self {
        use class_ids::*;
        let named = [
            (BUILDING, "building"),
            (ROAD, "road"),
            (SIDEWALK, "sidewalk"),
            (BICYCLE, "bicycle"),
            (VEGETATION, "vegetation"),
            (POLE, "pole"),
            (TRUNK, "trunk"),
            (CAR, "car"),
            (PERSON, "person"),
            (UNLABELED, "other"),
        ];
        let entries = named
            .iter()
            .map(|&(id, name)| LabelEntry {
                class_id: id,
                name: name.into(),
                label: match id {
                    POLE => SemanticLabel::Pole,
                    TRUNK => SemanticLabel::Trunk,
                    _ => SemanticLabel::Other(id),
                },
            })
            .collect();
        Self { entries }
    }
}

impl LabelDictionary {
    /// Builds a dictionary; fails if a class id is listed twice.
    pub fn new(entries: Vec<LabelEntry>) -> Result<Self, ClusterError> {
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.class_id == e.class_id) {
                return Err(ClusterError::DuplicateClassId(e.class_id));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn decode(&self, class_id: u16) -> SemanticLabel {
        self.entries
            .iter()
            .find(|e| e.class_id == class_id)
            .map(|e| e.label)
            .unwrap_or(SemanticLabel::Other(class_id))
    }

    /// First class id mapping onto `label`; `Other(id)` encodes as `id`.
    pub fn encode(&self, label: SemanticLabel) -> u16 {
        match self.entries.iter().find(|e| e.label == label) {
            Some(e) => e.class_id,
            None => match label {
                SemanticLabel::Other(id) => id,
                SemanticLabel::Pole => class_ids::POLE,
                SemanticLabel::Trunk => class_ids::TRUNK,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub label: SemanticLabel,
}

impl LabeledPoint {
    pub fn new(x: f64, y: f64, z: f64, label: SemanticLabel) -> Self {
        Self { x, y, z, label }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A timestamped LiDAR scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub points: Vec<LabeledPoint>,
}

impl Frame {
    pub fn new(timestamp: f64, points: Vec<LabeledPoint>) -> Self {
        Self { timestamp, points }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterId(pub u64);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("empty cluster")]
    EmptyCluster,
    #[error("label {0} is not a landmark label")]
    NotLandmark(SemanticLabel),
    #[error("non-finite point coordinate")]
    NonFinite,
    #[error("expected {expected} member points, found {found}")]
    PointCountMismatch { expected: usize, found: usize },
    #[error("class id {0} listed twice in label dictionary")]
    DuplicateClassId(u16),
}

/// Mean position of `points` and its projection onto the XY plane.
pub fn compute_centroids(points: &[LabeledPoint]) -> Result<([f64; 3], [f64; 2]), ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::EmptyCluster);
    }
    let n = points.len() as f64;
    let mut sum = [0.0f64; 3];
    for p in points {
        sum[0] += p.x;
        sum[1] += p.y;
        sum[2] += p.z;
    }
    let c = [sum[0] / n, sum[1] / n, sum[2] / n];
    Ok((c, [c[0], c[1]]))
}

/// A pole-like object: labeled member points plus cached centroids.
///
/// A cluster loaded from a map summary may carry no member points; its
/// centroid and `point_count` are then authoritative.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    id: ClusterId,
    label: SemanticLabel,
    points: Vec<LabeledPoint>,
    point_count: usize,
    centroid3d: [f64; 3],
}

impl Cluster {
    pub fn new(id: ClusterId, label: SemanticLabel, points: Vec<LabeledPoint>) -> Result<Self, ClusterError> {
        if !label.is_landmark() {
            return Err(ClusterError::NotLandmark(label));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
        let (centroid3d, _) = compute_centroids(&points)?;
        Ok(Self { id, label, point_count: points.len(), points, centroid3d })
    }

    /// A cluster known only by its centroid, e.g. from a map file without
    /// the point sidecar.
    pub fn from_summary(
        id: ClusterId,
        label: SemanticLabel,
        centroid3d: [f64; 3],
        point_count: usize,
    ) -> Result<Self, ClusterError> {
        if !label.is_landmark() {
            return Err(ClusterError::NotLandmark(label));
        }
        if point_count == 0 {
            return Err(ClusterError::EmptyCluster);
        }
        if !centroid3d.iter().all(|v| v.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
        Ok(Self { id, label, points: Vec::new(), point_count, centroid3d })
    }

    /// Attaches member points to a summary cluster without touching the
    /// stored centroid.
    pub fn with_points(mut self, points: Vec<LabeledPoint>) -> Result<Self, ClusterError> {
        if points.len() != self.point_count {
            return Err(ClusterError::PointCountMismatch { expected: self.point_count, found: points.len() });
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
        self.points = points;
        Ok(self)
    }

    pub fn id(&self) -> ClusterId {
        self.id
    }

    pub fn label(&self) -> SemanticLabel {
        self.label
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn has_points(&self) -> bool {
        !self.points.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn centroid3d(&self) -> [f64; 3] {
        self.centroid3d
    }

    pub fn centroid2d(&self) -> [f64; 2] {
        [self.centroid3d[0], self.centroid3d[1]]
    }

    pub(crate) fn set_id(&mut self, id: ClusterId) {
        self.id = id;
    }

    /// Merges `other` into this cluster, keeping this cluster's id and label.
    ///
    /// The centroid becomes the mass-weighted mean of both clusters. If
    /// either side is summary-only the result is summary-only too.
    pub(crate) fn absorb(&mut self, other: &Cluster) {
        if self.has_points() && other.has_points() {
            self.points.extend_from_slice(&other.points);
            self.point_count = self.points.len();
            if let Ok((c, _)) = compute_centroids(&self.points) {
                self.centroid3d = c;
            }
        } else {
            let (n_self, n_other) = (self.point_count as f64, other.point_count as f64);
            let total = n_self + n_other;
            for k in 0..3 {
                self.centroid3d[k] = (self.centroid3d[k] * n_self + other.centroid3d[k] * n_other) / total;
            }
            self.points.clear();
            self.point_count += other.point_count;
        }
    }

    /// The cluster with every point and the centroid mapped by `f`.
    pub(crate) fn map_positions(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Cluster {
        let points = self
            .points
            .iter()
            .map(|p| {
                let q = f(p.xyz());
                LabeledPoint::new(q[0], q[1], q[2], p.label)
            })
            .collect();
        Cluster {
            id: self.id,
            label: self.label,
            points,
            point_count: self.point_count,
            centroid3d: f(self.centroid3d),
        }
    }
}
