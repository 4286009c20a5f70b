//! Rigid transforms and small planar helpers.

use core::fmt;

#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float as _;
use nalgebra::{Isometry3, Matrix3, Point3, Quaternion, Rotation3, Translation3, UnitQuaternion, Vector2, Vector3};

/// Tolerance used when validating rotation matrices and quaternions.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// A rigid transform in 3D (rotation + translation).
///
/// Composition follows the matrix convention: `a.compose(&b)` applies `b`
/// first, then `a`.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose(Isometry3<f64>);

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.translation();
        let q = self.0.rotation.quaternion();
        write!(
            f,
            "Pose(t=[{:.6}, {:.6}, {:.6}], q=[{:.6}, {:.6}, {:.6}, {:.6}])",
            t.x, t.y, t.z, q.i, q.j, q.k, q.w
        )
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose(Isometry3::identity())
    }

    pub fn from_isometry(iso: Isometry3<f64>) -> Self {
        Pose(iso)
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose(Isometry3::from_parts(Translation3::new(x, y, z), UnitQuaternion::identity()))
    }

    /// Planar pose: yaw about +z (radians) then translation.
    pub fn from_xy_yaw(x: f64, y: f64, yaw: f64) -> Self {
        Self::from_parts(Vector3::new(x, y, 0.0), UnitQuaternion::from_euler_angles(0.0, 0.0, yaw))
    }

    pub fn from_parts(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Pose(Isometry3::from_parts(translation.into(), rotation))
    }

    /// Builds a pose from a quaternion given as `(x, y, z, w)` components.
    ///
    /// The quaternion is used as-is (not renormalized) so that `is_valid`
    /// can reject non-unit input.
    pub fn from_quaternion_unchecked(translation: Vector3<f64>, qx: f64, qy: f64, qz: f64, qw: f64) -> Self {
        let q = UnitQuaternion::new_unchecked(Quaternion::new(qw, qx, qy, qz));
        Self::from_parts(translation, q)
    }

    /// Builds a pose from a rotation matrix, rejecting matrices that are not
    /// orthonormal with determinant +1.
    pub fn from_rotation_matrix(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Option<Self> {
        if !is_rotation_matrix(&rotation, 1e-6) || !translation.iter().all(|v| v.is_finite()) {
            return None;
        }
        let rot = Rotation3::from_matrix_unchecked(rotation);
        Some(Self::from_parts(translation, UnitQuaternion::from_rotation_matrix(&rot)))
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.0
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.translation.vector
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.0.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.0.rotation.to_rotation_matrix().into_inner()
    }

    /// Heading about +z in radians.
    pub fn yaw(&self) -> f64 {
        self.0.rotation.euler_angles().2
    }

    pub fn compose(&self, rhs: &Pose) -> Pose {
        Pose(self.0 * rhs.0)
    }

    pub fn inverse(&self) -> Pose {
        Pose(self.0.inverse())
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.0.transform_point(p)
    }

    pub fn transform_xyz(&self, xyz: [f64; 3]) -> [f64; 3] {
        let p = self.transform_point(&Point3::new(xyz[0], xyz[1], xyz[2]));
        [p.x, p.y, p.z]
    }

    /// Re-projects the rotation onto the unit sphere.
    pub fn renormalized(&self) -> Pose {
        let mut iso = self.0;
        iso.rotation.renormalize();
        Pose(iso)
    }

    /// True when every component is finite and the rotation is a proper
    /// rotation within [`ROTATION_TOLERANCE`].
    pub fn is_valid(&self) -> bool {
        let q = self.0.rotation.quaternion();
        let finite = self.translation().iter().all(|v| v.is_finite()) && q.coords.iter().all(|v| v.is_finite());
        finite && (q.norm() - 1.0).abs() <= ROTATION_TOLERANCE * 10.0 && is_rotation_matrix(&self.rotation_matrix(), ROTATION_TOLERANCE * 10.0)
    }

    /// Angle (radians) of the relative rotation between two poses.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        self.0.rotation.angle_to(&other.0.rotation)
    }

    /// Euclidean distance between the two translations.
    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.translation() - other.translation()).norm()
    }
}

/// Checks `RᵀR = I` and `det(R) = +1` within `tol`.
pub fn is_rotation_matrix(r: &Matrix3<f64>, tol: f64) -> bool {
    if !r.iter().all(|v| v.is_finite()) {
        return false;
    }
    let gram = r.transpose() * r;
    let ortho = (gram - Matrix3::identity()).iter().all(|v| v.abs() <= tol);
    ortho && (r.determinant() - 1.0).abs() <= tol
}

#[inline]
pub fn dist2d(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

#[inline]
pub fn dist3d(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Clockwise angle in degrees, in `[0, 360)`, that takes `from` onto `to`.
///
/// Both vectors live in the XY plane with the usual counter-clockwise
/// positive orientation, so clockwise is the negative mathematical sense.
pub fn clockwise_angle_deg(from: Vector2<f64>, to: Vector2<f64>) -> f64 {
    let ccw = (from.x * to.y - from.y * to.x).atan2(from.dot(&to));
    wrap_degrees(-ccw.to_degrees())
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let mut a = deg % 360.0;
    if a < 0.0 {
        a += 360.0;
    }
    // -1e-17 % 360 + 360 rounds to exactly 360
    if a >= 360.0 {
        a -= 360.0;
    }
    a
}

/// Circular difference of two angles in degrees, in `[0, 180]`.
pub fn circular_difference_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}
