//! Closed-form least-squares rigid alignment of point correspondences.

use nalgebra::{Matrix3, Vector3};

use super::RelocError;
use crate::geometry::Pose;

/// Relative singular-value floor below which correspondences are treated
/// as collinear.
const RANK_TOLERANCE: f64 = 1e-10;

/// The rigid transform `T` minimising `Σ ||dst_i - T·src_i||²` (no scale).
///
/// Needs at least three correspondences that are not all collinear.
pub fn estimate_rigid_transform(src: &[[f64; 3]], dst: &[[f64; 3]]) -> Result<Pose, RelocError> {
    if src.len() != dst.len() {
        return Err(RelocError::LengthMismatch);
    }
    if src.len() < 3 {
        return Err(RelocError::DegenerateCorrespondences);
    }
    let n = src.len() as f64;
    let mean = |pts: &[[f64; 3]]| pts.iter().fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p)) / n;
    let (cs, cd) = (mean(src), mean(dst));

    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (Vector3::from(*s) - cs) * (Vector3::from(*d) - cd).transpose();
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(RelocError::DegenerateCorrespondences);
    }

    let svd = h.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(RelocError::DegenerateCorrespondences);
    };
    let mut sv = [svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]];
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= RANK_TOLERANCE * sv[0] {
        return Err(RelocError::DegenerateCorrespondences);
    }

    let v = v_t.transpose();
    let sign = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign)) * u.transpose();
    let t = cd - r * cs;
    Pose::from_rotation_matrix(r, t).ok_or(RelocError::DegenerateCorrespondences)
}
