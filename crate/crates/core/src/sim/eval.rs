//! Success tests, densities, quantiles and the two evaluation protocols.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::run::{drift_odometry, simulate_run, DriftSpec, RouteSpec};
use super::{derive_seed, Scene, SimError};
use crate::extraction::extract_clusters;
use crate::geometry::{dist3d, Pose};
use crate::localization::{run_pipeline, PipelineParams};
use crate::map::ClusterMap;
use crate::registration::{register_frame, RegistrationParams};
use crate::association::AssociationIndex;
use crate::relocalization::relocalize_with_index;

/// Whether an estimated position lies strictly within `delta` of the truth.
pub fn success(t_est: [f64; 3], t_gt: [f64; 3], delta: f64) -> bool {
    dist3d(t_est, t_gt) < delta
}

/// Clusters per meter of trajectory.
pub fn cluster_density(n: usize, length: f64) -> Result<f64, SimError> {
    if !(length > 0.0) {
        return Err(SimError::NonPositiveLength);
    }
    Ok(n as f64 / length)
}

/// Nearest-rank quantile of ascending `sorted`; `NaN` when empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Root-mean-square 3D position error between two time-aligned
/// trajectories.
pub fn evaluate_localization(truth: &[(f64, Pose)], estimate: &[(f64, Pose)]) -> Result<f64, SimError> {
    if truth.len() != estimate.len() {
        return Err(SimError::Misaligned);
    }
    if truth.is_empty() {
        return Err(SimError::EmptyTrajectory);
    }
    let mut sum = 0.0;
    for ((ta, a), (tb, b)) in truth.iter().zip(estimate) {
        if (ta - tb).abs() > 1e-6 {
            return Err(SimError::Misaligned);
        }
        let d = a.translation_distance(b);
        sum += d * d;
    }
    Ok((sum / truth.len() as f64).sqrt())
}

fn to_xyz(p: &Pose) -> [f64; 3] {
    let t = p.translation();
    [t.x, t.y, t.z]
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let f = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) };
    crate::geometry::dist2d(p, [a[0] + f * dx, a[1] + f * dy])
}

/// Landmarks the sensor sees at some point along `route`, per meter.
pub fn route_cluster_density(scene: &Scene, route: &RouteSpec) -> Result<f64, SimError> {
    let r = scene.spec.sensor_range;
    let seen = scene
        .landmarks
        .iter()
        .filter(|lm| route.waypoints.windows(2).any(|w| segment_distance(lm.position, w[0], w[1]) <= r))
        .count();
    cluster_density(seen, route.length())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Retention fraction, or 1 for localization runs.
    pub variant: f64,
    pub success_count: usize,
    pub trial_count: usize,
    pub success_rate: f64,
    /// Distance travelled before the first success; failed trials count
    /// as infinite.
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub rmse: Option<f64>,
    pub cluster_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelocEvalSpec {
    pub retentions: Vec<f64>,
    pub trials: usize,
    /// Success threshold, meters.
    pub delta: f64,
    pub max_distance: f64,
    /// Distance between relocalization attempts, meters.
    pub step: f64,
    pub drift: DriftSpec,
    pub seed: u64,
}

impl Default for RelocEvalSpec {
    fn default() -> Self {
        Self {
            retentions: alloc::vec![1.0, 0.8, 0.6],
            trials: 50,
            delta: 2.0,
            max_distance: 100.0,
            step: 2.5,
            drift: DriftSpec { translational_drift: 0.01, ..Default::default() },
            seed: 0,
        }
    }
}

/// Distance driven from `start` until the first successful fix, if any.
///
/// Frames are fused into a local map anchored at the start pose using the
/// drifting odometry, and relocalization is retried every `step` meters.
fn distance_to_relocalize(scene: &Scene, route: &RouteSpec, start: f64, spec: &RelocEvalSpec, drift_seed: u64, params: &PipelineParams) -> f64 {
    let steps = (spec.max_distance / spec.step + 1e-9).floor() as usize;
    let truth: Vec<Pose> = (0..=steps).map(|j| route.pose_at(start + j as f64 * spec.step)).collect();
    let odom = drift_odometry(&truth, &DriftSpec { seed: drift_seed, ..spec.drift });
    let origin_inv = odom[0].inverse();
    let index = AssociationIndex::new(&scene.map, params.association.search_radius);
    let mut local = ClusterMap::new();
    for (j, gt) in truth.iter().enumerate() {
        let rel = origin_inv.compose(&odom[j]);
        let frame = scene.observe(gt, 0.0, derive_seed(drift_seed, 6, j as u64));
        let clusters = extract_clusters(&frame, &params.extraction);
        if register_frame(&mut local, &clusters, &rel, &RegistrationParams::default()).is_err() {
            continue;
        }
        if let Ok(r) = relocalize_with_index(&local, &scene.map, &index, &params.association, &params.reloc) {
            let est = r.pose.compose(&rel);
            if success(to_xyz(&est), to_xyz(gt), spec.delta) {
                return j as f64 * spec.step;
            }
        }
    }
    f64::INFINITY
}

/// Distance-to-relocalization statistics for each retention fraction.
///
/// Every trial starts at a random point of `route` leaving room for
/// `max_distance` of driving. Retained landmarks are drawn per trial.
pub fn evaluate_relocalization(scene: &Scene, route: &RouteSpec, spec: &RelocEvalSpec, params: &PipelineParams) -> Result<Vec<EvalReport>, SimError> {
    let length = route.length();
    if !(length > 0.0) {
        return Err(SimError::NonPositiveLength);
    }
    if !(spec.step > 0.0) || !(spec.max_distance >= 0.0) || !(spec.delta > 0.0) {
        return Err(SimError::InvalidSpec("step and delta must be > 0"));
    }
    let span = (length - spec.max_distance).max(0.0);
    let mut reports = Vec::with_capacity(spec.retentions.len());
    for (v, &fraction) in spec.retentions.iter().enumerate() {
        let mut distances = Vec::with_capacity(spec.trials);
        let mut density = 0.0;
        for trial in 0..spec.trials {
            let trial_seed = derive_seed(spec.seed, 7 + v as u64, trial as u64);
            let sub = scene.retain_fraction(fraction, trial_seed);
            density += route_cluster_density(&sub, route)?;
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let start = if span > 0.0 { rng.random_range(0.0..span) } else { 0.0 };
            distances.push(distance_to_relocalize(&sub, route, start, spec, trial_seed, params));
        }
        distances.sort_by(f64::total_cmp);
        let success_count = distances.iter().filter(|d| d.is_finite()).count();
        let trials = spec.trials.max(1) as f64;
        reports.push(EvalReport {
            variant: fraction,
            success_count,
            trial_count: spec.trials,
            success_rate: success_count as f64 / trials,
            p50: quantile(&distances, 0.50),
            p90: quantile(&distances, 0.90),
            p95: quantile(&distances, 0.95),
            p99: quantile(&distances, 0.99),
            rmse: None,
            cluster_density: density / trials,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub rmse_pipeline: f64,
    pub rmse_odometry: f64,
    pub fixes_applied: usize,
    pub frames: usize,
}

/// Simulates one run and scores drift correction against raw odometry.
pub fn run_localization_experiment(scene: &Scene, route: &RouteSpec, drift: &DriftSpec, params: &PipelineParams) -> Result<LocalizationReport, SimError> {
    let run = simulate_run(scene, route, drift)?;
    let out = run_pipeline(&run.frames, &run.odometry, &scene.map, params);
    let truth = run.truth_trajectory();
    Ok(LocalizationReport {
        rmse_pipeline: evaluate_localization(&truth, &out.trajectory)?,
        rmse_odometry: evaluate_localization(&truth, &run.odometry_trajectory())?,
        fixes_applied: out.fixes_applied(),
        frames: run.frames.len(),
    })
}
