//! The work behind each subcommand, returning values instead of printing.

use std::fs;
use std::path::Path;

use polemap_core::extraction::extract_clusters;
use polemap_core::localization::{run_pipeline, PipelineOutput};
use polemap_core::registration::{build_local_map, register_frame};
use polemap_core::relocalization::{relocalize, RelocResult};
use polemap_core::sim::{
    cluster_density, evaluate_localization, evaluate_relocalization, generate_scene, run_localization_experiment, simulate_run,
    EvalReport, LocalizationReport,
};
use polemap_core::{ClusterMap, Pose};

use crate::config::Config;
use crate::dataset::Dataset;
use crate::error::Error;
use crate::mapfile::save_map;

#[derive(Debug, Clone, PartialEq)]
pub struct BuildSummary {
    pub frames: usize,
    pub clusters: usize,
    /// Planar length of the reference trajectory, meters.
    pub length: f64,
    /// Clusters per meter of trajectory, `None` for a zero-length run.
    pub density: Option<f64>,
}

/// Planar length of a pose sequence.
pub fn path_length(poses: &[(f64, Pose)]) -> f64 {
    poses
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].1.translation(), w[1].1.translation());
            (b.x - a.x).hypot(b.y - a.y)
        })
        .sum()
}

fn sim_error(e: polemap_core::sim::SimError) -> Error {
    Error::Other(e.to_string())
}

/// Extracts every frame and registers it at its reference pose.
pub fn build_map(dataset: &Dataset, cfg: &Config) -> Result<(ClusterMap, BuildSummary), Error> {
    let poses = dataset.poses()?;
    let frames = dataset.load_frames(&cfg.labels)?;
    let mut map = ClusterMap::new();
    for (frame, (_, pose)) in frames.iter().zip(&poses) {
        let clusters = extract_clusters(frame, &cfg.extraction);
        register_frame(&mut map, &clusters, pose, &cfg.registration).map_err(|e| Error::Other(e.to_string()))?;
    }
    let length = path_length(&poses);
    let summary = BuildSummary { frames: frames.len(), clusters: map.len(), length, density: cluster_density(map.len(), length).ok() };
    Ok((map, summary))
}

/// Relocalizes frame `k` of `dataset`, clusters taken in the sensor frame.
pub fn relocalize_frame(map: &ClusterMap, dataset: &Dataset, k: usize, cfg: &Config) -> Result<RelocResult, Error> {
    let poses = dataset.poses()?;
    let Some(&(ts, _)) = poses.get(k) else {
        return Err(Error::Usage(format!("frame {k} out of range, dataset has {} poses", poses.len())));
    };
    let frame = dataset.load_frame(k, ts, &cfg.labels)?;
    let local = build_local_map(&extract_clusters(&frame, &cfg.extraction), &Pose::identity());
    relocalize(&local, map, &cfg.association, &cfg.reloc).map_err(Error::Reloc)
}

/// One line of `key=value` fields describing a relocalization outcome.
pub fn reloc_record(result: &Result<RelocResult, Error>) -> String {
    match result {
        Ok(r) => {
            let t = r.pose.translation();
            let q = r.pose.rotation();
            format!(
                "status=ok x={:.6} y={:.6} z={:.6} yaw_deg={:.6} qx={:.9} qy={:.9} qz={:.9} qw={:.9} inliers={} residual_rms={:.6} fine_fallback={}",
                t.x,
                t.y,
                t.z,
                r.pose.yaw().to_degrees(),
                q.i,
                q.j,
                q.k,
                q.w,
                r.inlier_pairs.len(),
                r.residual_rms,
                r.fine_fallback
            )
        }
        Err(Error::Reloc(f)) => {
            use polemap_core::relocalization::RelocFailure::*;
            let count = match f {
                NoMatches { pairs } => format!(" pairs={pairs}"),
                ConsistencyCollapse { survivors } | RansacFailure { survivors } => format!(" survivors={survivors}"),
                DegenerateFit => String::new(),
            };
            format!("status=failed reason={}{count}", f.reason())
        }
        Err(e) => format!("status=error message={e:?}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeSummary {
    pub output: PipelineOutput,
    /// Against the dataset's reference poses.
    pub rmse: f64,
}

/// Runs drift correction over the dataset's odometry.
pub fn localize(map: &ClusterMap, dataset: &Dataset, cfg: &Config) -> Result<LocalizeSummary, Error> {
    let truth = dataset.poses()?;
    let odometry = dataset.odometry()?;
    if odometry.len() != truth.len() {
        return Err(Error::Usage(format!("{} odometry poses for {} frames", odometry.len(), truth.len())));
    }
    let frames = dataset.load_frames(&cfg.labels)?;
    let odo: Vec<Pose> = odometry.iter().map(|(_, p)| *p).collect();
    let output = run_pipeline(&frames, &odo, map, &cfg.pipeline_params());
    let rmse = evaluate_localization(&truth, &output.trajectory).map_err(sim_error)?;
    Ok(LocalizeSummary { output, rmse })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub frames: usize,
    pub landmarks: usize,
}

/// Writes a synthetic dataset plus its prior map as `prior_map.txt`.
pub fn simulate(cfg: &Config, out: &Path) -> Result<SimulateSummary, Error> {
    let scene = generate_scene(&cfg.scene).map_err(sim_error)?;
    let run = simulate_run(&scene, &cfg.route, &cfg.drift).map_err(sim_error)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ds = Dataset::new(out);
    let odometry = run.odometry_trajectory();
    ds.write(&run.frames, &run.truth_trajectory(), Some(&odometry), &cfg.labels)?;
    save_map(&out.join("prior_map.txt"), &scene.map, &cfg.labels, true)?;
    Ok(SimulateSummary { frames: run.frames.len(), landmarks: scene.landmarks.len() })
}

pub fn evaluate_reloc(cfg: &Config) -> Result<Vec<EvalReport>, Error> {
    let scene = generate_scene(&cfg.scene).map_err(sim_error)?;
    evaluate_relocalization(&scene, &cfg.route, &cfg.eval_spec(), &cfg.pipeline_params()).map_err(sim_error)
}

pub fn evaluate_loc(cfg: &Config) -> Result<LocalizationReport, Error> {
    let scene = generate_scene(&cfg.scene).map_err(sim_error)?;
    run_localization_experiment(&scene, &cfg.route, &cfg.drift, &cfg.pipeline_params()).map_err(sim_error)
}
