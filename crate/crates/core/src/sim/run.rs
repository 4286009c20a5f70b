//! Vehicle routes and drifting odometry.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float as _;
use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, gaussian, Scene, SimError};
use crate::cluster::Frame;
use crate::geometry::Pose;

/// A polyline driven at constant speed, sampled at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSpec {
    pub waypoints: Vec<[f64; 2]>,
    /// Meters per second.
    pub speed: f64,
    /// Frames per second.
    pub frame_rate: f64,
}

impl RouteSpec {
    /// A 500 m route through the standard scene with two turns.
    pub fn standard() -> Self {
        Self {
            waypoints: alloc::vec![[-250.0, -50.0], [0.0, -50.0], [0.0, 50.0], [150.0, 50.0]],
            speed: 5.0,
            frame_rate: 10.0,
        }
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| crate::geometry::dist2d(w[0], w[1])).sum()
    }

    /// Pose after driving `s` meters, heading along the current segment.
    pub fn pose_at(&self, s: f64) -> Pose {
        let Some(&first) = self.waypoints.first() else { return Pose::identity() };
        let mut left = s.max(0.0);
        let mut last = Pose::from_xy_yaw(first[0], first[1], 0.0);
        for w in self.waypoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = crate::geometry::dist2d(a, b);
            if len == 0.0 {
                continue;
            }
            let yaw = (b[1] - a[1]).atan2(b[0] - a[0]);
            let f = (left / len).min(1.0);
            last = Pose::from_xy_yaw(a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), yaw);
            if left <= len {
                return last;
            }
            left -= len;
        }
        last
    }

    /// Timestamped ground-truth poses of every frame.
    pub fn poses(&self) -> Result<Vec<(f64, Pose)>, SimError> {
        let length = self.length();
        if !(length > 0.0) || !(self.speed > 0.0) || !(self.frame_rate > 0.0) {
            return Err(SimError::NonPositiveLength);
        }
        let dt = 1.0 / self.frame_rate;
        let n = (length / (self.speed * dt) + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| (k as f64 * dt, self.pose_at(k as f64 * dt * self.speed))).collect())
    }
}

/// Odometry error model applied to every true increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    /// Relative over-estimate of travelled distance.
    pub translational_drift: f64,
    /// Heading error accumulated per meter travelled, degrees.
    pub rotational_drift: f64,
    /// Per-increment planar translation noise, meters.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self { translational_drift: 0.0, rotational_drift: 0.0, noise_sigma: 0.0, seed: 0 }
    }
}

impl DriftSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.translational_drift) || !ok(self.rotational_drift) || !ok(self.noise_sigma) {
            return Err(SimError::InvalidSpec("drift terms must be >= 0"));
        }
        Ok(())
    }
}

/// Odometry poses obtained by corrupting each true increment of `truth`.
///
/// The first odometry pose equals the first true pose.
pub fn drift_odometry(truth: &[Pose], drift: &DriftSpec) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(drift.seed, 4, 0));
    let mut out = Vec::with_capacity(truth.len());
    let Some(&first) = truth.first() else { return out };
    out.push(first);
    let mut current = first;
    for w in truth.windows(2) {
        let inc = w[0].inverse().compose(&w[1]);
        let t = inc.translation();
        let travelled = t.norm();
        let t = t * (1.0 + drift.translational_drift)
            + Vector3::new(gaussian(&mut rng, drift.noise_sigma), gaussian(&mut rng, drift.noise_sigma), 0.0);
        let yaw_err = UnitQuaternion::from_euler_angles(0.0, 0.0, (drift.rotational_drift * travelled).to_radians());
        current = current.compose(&Pose::from_parts(t, inc.rotation() * yaw_err));
        out.push(current);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub frames: Vec<Frame>,
    pub truth: Vec<Pose>,
    pub odometry: Vec<Pose>,
}

impl SimRun {
    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|f| f.timestamp)
    }

    pub fn truth_trajectory(&self) -> Vec<(f64, Pose)> {
        self.timestamps().zip(self.truth.iter().copied()).collect()
    }

    pub fn odometry_trajectory(&self) -> Vec<(f64, Pose)> {
        self.timestamps().zip(self.odometry.iter().copied()).collect()
    }
}

/// Drives `route` through `scene`, recording one frame per pose.
pub fn simulate_run(scene: &Scene, route: &RouteSpec, drift: &DriftSpec) -> Result<SimRun, SimError> {
    drift.validate()?;
    let poses = route.poses()?;
    let truth: Vec<Pose> = poses.iter().map(|p| p.1).collect();
    let frames = poses
        .iter()
        .enumerate()
        .map(|(k, (t, pose))| scene.observe(pose, *t, derive_seed(scene.spec.seed, 5, k as u64)))
        .collect();
    let odometry = drift_odometry(&truth, drift);
    Ok(SimRun { frames, truth, odometry })
}
