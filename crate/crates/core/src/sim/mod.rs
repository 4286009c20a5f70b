//! Synthetic street scenes, drifting odometry and evaluation metrics.

mod eval;
mod run;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::cluster::{Cluster, ClusterId, Frame, LabeledPoint, SemanticLabel};
use crate::geometry::{dist2d, Pose};
use crate::map::ClusterMap;

pub use eval::{
    route_cluster_density,
    cluster_density, evaluate_localization, evaluate_relocalization, quantile, run_localization_experiment, success,
    EvalReport, LocalizationReport, RelocEvalSpec,
};
pub use run::{drift_odometry, simulate_run, DriftSpec, RouteSpec, SimRun};

/// Class id used for clutter points.
pub const CLUTTER_CLASS: u16 = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidSpec(&'static str),
    #[error("cannot place {requested} landmarks at the requested spacing (placed {placed})")]
    Infeasible { requested: usize, placed: usize },
    #[error("route length must be > 0")]
    NonPositiveLength,
    #[error("trajectories are not time-aligned")]
    Misaligned,
    #[error("empty trajectory")]
    EmptyTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    /// Extent along x, meters; the scene is centred on the origin.
    pub width: f64,
    /// Extent along y, meters.
    pub height: f64,
    pub n_clusters: usize,
    /// Fraction of landmarks that are poles; the rest are trunks.
    pub pole_fraction: f64,
    pub min_spacing: f64,
    /// Points sampled per visible landmark in each frame.
    pub points_per_cluster: usize,
    /// Member points per cluster in the generated prior map.
    pub map_points_per_cluster: usize,
    pub point_noise_sigma: f64,
    /// Probability that a landmark point carries the other landmark label.
    pub label_flip_rate: f64,
    /// Non-landmark points scattered around the sensor in each frame.
    pub clutter_points: usize,
    pub sensor_range: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self::standard(0)
    }
}

impl SceneSpec {
    /// The 600 m × 200 m scene used by the evaluation suite, about 0.6
    /// landmarks per meter along the standard route.
    pub fn standard(seed: u64) -> Self {
        Self {
            width: 600.0,
            height: 200.0,
            n_clusters: 600,
            pole_fraction: 0.5,
            min_spacing: 3.0,
            points_per_cluster: 40,
            map_points_per_cluster: 60,
            point_noise_sigma: 0.02,
            label_flip_rate: 0.02,
            clutter_points: 200,
            sensor_range: 60.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.width) || !positive(self.height) {
            return Err(SimError::InvalidSpec("area must be > 0"));
        }
        if !positive(self.min_spacing) {
            return Err(SimError::InvalidSpec("min_spacing must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.pole_fraction) || !(0.0..=1.0).contains(&self.label_flip_rate) {
            return Err(SimError::InvalidSpec("fractions must lie in [0, 1]"));
        }
        if !(self.point_noise_sigma >= 0.0) || !positive(self.sensor_range) {
            return Err(SimError::InvalidSpec("noise must be >= 0 and sensor_range > 0"));
        }
        if self.points_per_cluster == 0 || self.map_points_per_cluster == 0 {
            return Err(SimError::InvalidSpec("points per cluster must be >= 1"));
        }
        Ok(())
    }
}

/// A vertical cylinder standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub position: [f64; 2],
    pub label: SemanticLabel,
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub landmarks: Vec<Landmark>,
    /// Prior map; cluster `i` is landmark `i`.
    pub map: ClusterMap,
}

/// Mixes a master seed with a stream tag and index into an independent seed.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    z * sigma
}

/// Places landmarks by dart throwing with a minimum spacing.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SimError> {
    spec.validate()?;
    let n = spec.n_clusters;
    let s = spec.min_spacing;
    // hexagonal packing bounds how many discs of diameter s fit
    let capacity = 0.9069 * (spec.width + s) * (spec.height + s) / (PI * s * s / 4.0);
    if n as f64 > capacity {
        return Err(SimError::Infeasible { requested: n, placed: 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1, 0));
    let cell = s / 2f64.sqrt();
    let mut grid: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut positions: Vec<[f64; 2]> = Vec::with_capacity(n);
    let max_attempts = 1000 * n + 10_000;
    let mut attempts = 0;
    while positions.len() < n {
        if attempts == max_attempts {
            return Err(SimError::Infeasible { requested: n, placed: positions.len() });
        }
        attempts += 1;
        let p = [
            rng.random_range(-spec.width / 2.0..=spec.width / 2.0),
            rng.random_range(-spec.height / 2.0..=spec.height / 2.0),
        ];
        let (cx, cy) = ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
        let clear = (-2..=2).all(|dx| {
            (-2..=2).all(|dy| grid.get(&(cx + dx, cy + dy)).is_none_or(|&j| dist2d(positions[j], p) >= s))
        });
        if clear {
            grid.insert((cx, cy), positions.len());
            positions.push(p);
        }
    }

    let landmarks: Vec<Landmark> = positions
        .into_iter()
        .map(|position| {
            if rng.random::<f64>() < spec.pole_fraction {
                Landmark { position, label: SemanticLabel::Pole, radius: rng.random_range(0.08..0.15), height: rng.random_range(4.0..8.0) }
            } else {
                Landmark { position, label: SemanticLabel::Trunk, radius: rng.random_range(0.15..0.35), height: rng.random_range(1.5..3.0) }
            }
        })
        .collect();
    Ok(Scene::from_landmarks(*spec, landmarks))
}

/// Points on the surface of `lm`, in world coordinates.
///
/// Heights are stratified over the cylinder so every sample covers its
/// full extent; azimuths are uniform.
pub fn sample_landmark_points(lm: &Landmark, n: usize, sigma: f64, flip_rate: f64, rng: &mut ChaCha8Rng) -> Vec<LabeledPoint> {
    (0..n)
        .map(|i| {
            let z = (i as f64 + rng.random::<f64>()) / n as f64 * lm.height;
            let a = rng.random_range(0.0..2.0 * PI);
            let label = if flip_rate > 0.0 && rng.random::<f64>() < flip_rate {
                match lm.label {
                    SemanticLabel::Pole => SemanticLabel::Trunk,
                    _ => SemanticLabel::Pole,
                }
            } else {
                lm.label
            };
            LabeledPoint::new(
                lm.position[0] + lm.radius * a.cos() + gaussian(rng, sigma),
                lm.position[1] + lm.radius * a.sin() + gaussian(rng, sigma),
                z + gaussian(rng, sigma),
                label,
            )
        })
        .collect()
}

impl Scene {
    /// Builds the scene and its prior map from explicit landmarks.
    pub fn from_landmarks(spec: SceneSpec, landmarks: Vec<Landmark>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 2, 0));
        let clusters: Vec<Cluster> = landmarks
            .iter()
            .map(|lm| {
                let mut pts = sample_landmark_points(lm, spec.map_points_per_cluster, spec.point_noise_sigma, 0.0, &mut rng);
                pts.retain(|p| p.label == lm.label);
                Cluster::new(ClusterId(0), lm.label, pts).expect("finite points")
            })
            .collect();
        Scene { spec, map: ClusterMap::from_clusters(clusters), landmarks }
    }

    /// A copy keeping a seeded random `fraction` of the landmarks.
    pub fn retain_fraction(&self, fraction: f64, seed: u64) -> Scene {
        let keep = ((self.landmarks.len() as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3, 0));
        let mut idx = rand::seq::index::sample(&mut rng, self.landmarks.len(), keep).into_vec();
        idx.sort_unstable();
        let landmarks = idx.into_iter().map(|i| self.landmarks[i]).collect();
        Scene::from_landmarks(self.spec, landmarks)
    }

    /// Indices of landmarks within sensor range of `pose`.
    pub fn visible(&self, pose: &Pose) -> Vec<usize> {
        let t = pose.translation();
        let here = [t.x, t.y];
        (0..self.landmarks.len()).filter(|&i| dist2d(self.landmarks[i].position, here) <= self.spec.sensor_range).collect()
    }

    /// One labeled frame seen from `pose`, in the sensor frame.
    pub fn observe(&self, pose: &Pose, timestamp: f64, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let to_sensor = pose.inverse();
        let mut points = Vec::new();
        for i in self.visible(pose) {
            let world = sample_landmark_points(
                &self.landmarks[i],
                self.spec.points_per_cluster,
                self.spec.point_noise_sigma,
                self.spec.label_flip_rate,
                &mut rng,
            );
            points.extend(world.into_iter().map(|p| {
                let q = to_sensor.transform_xyz(p.xyz());
                LabeledPoint::new(q[0], q[1], q[2], p.label)
            }));
        }
        let r = self.spec.sensor_range;
        for _ in 0..self.spec.clutter_points {
            let (d, a) = (r * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI));
            let z = rng.random_range(0.0..0.3);
            points.push(LabeledPoint::new(d * a.cos(), d * a.sin(), z, SemanticLabel::Other(CLUTTER_CLASS)));
        }
        Frame::new(timestamp, points)
    }
}
