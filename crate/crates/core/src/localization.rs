//! Drift correction: odometry increments composed onto the latest global
//! fix.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use thiserror::Error;

use crate::association::{AssociationIndex, AssociationParams};
use crate::cluster::Frame;
use crate::extraction::{extract_clusters, ExtractionParams};
use crate::geometry::Pose;
use crate::map::ClusterMap;
use crate::registration::build_local_map;
use crate::relocalization::{relocalize_with_index, RelocFailure, RelocParams};

/// Increments kept for composing fixes that arrive late.
pub const INCREMENT_WINDOW: usize = 512;
/// Compositions between rotation renormalizations.
pub const RENORMALIZE_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryIncrement {
    /// Time of the frame the increment ends at.
    pub timestamp: f64,
    /// Motion from the previous frame to this one, in the previous frame.
    pub relative_pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchoredPose {
    pub anchor: Pose,
    pub accumulated: Pose,
    pub output: Pose,
}

impl AnchoredPose {
    pub fn new(anchor: Pose) -> Self {
        Self { anchor, accumulated: Pose::identity(), output: anchor }
    }

    fn with_accumulated(anchor: Pose, accumulated: Pose) -> Self {
        Self { anchor, accumulated, output: anchor.compose(&accumulated) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LocalizationError {
    #[error("out-of-order increment: {timestamp} after {last}")]
    OutOfOrder { timestamp: f64, last: f64 },
    #[error("invalid increment pose")]
    InvalidIncrement,
    #[error("invalid fix pose")]
    InvalidFix,
    #[error("stale-fix: {fix_timestamp} predates the retained increment window")]
    StaleFix { fix_timestamp: f64 },
    #[error("fix at {fix_timestamp} is newer than the latest increment at {latest}")]
    FutureFix { fix_timestamp: f64, latest: f64 },
    #[error("fix jumps {jump:.3} m, above the gate")]
    Gated { jump: f64 },
}

/// Anchored pose plus the recent increment history needed to apply fixes
/// computed for past frames.
#[derive(Debug, Clone)]
pub struct Localizer {
    state: AnchoredPose,
    start_timestamp: f64,
    history: VecDeque<OdometryIncrement>,
    /// Timestamp of the newest increment dropped from `history`.
    evicted_until: Option<f64>,
    compositions: usize,
    max_fix_jump: Option<f64>,
}

impl Localizer {
    pub fn new(anchor: Pose, start_timestamp: f64) -> Self {
        Self {
            state: AnchoredPose::new(anchor),
            start_timestamp,
            history: VecDeque::with_capacity(INCREMENT_WINDOW),
            evicted_until: None,
            compositions: 0,
            max_fix_jump: None,
        }
    }

    /// Fixes that would move the output further than `max_jump` meters are
    /// rejected.
    pub fn with_gate(mut self, max_jump: Option<f64>) -> Self {
        self.max_fix_jump = max_jump;
        self
    }

    pub fn state(&self) -> &AnchoredPose {
        &self.state
    }

    pub fn output(&self) -> Pose {
        self.state.output
    }

    pub fn latest_timestamp(&self) -> f64 {
        self.history.back().map_or(self.start_timestamp, |i| i.timestamp)
    }

    pub fn apply_increment(&mut self, inc: OdometryIncrement) -> Result<Pose, LocalizationError> {
        let last = self.latest_timestamp();
        if !(inc.timestamp >= last) {
            return Err(LocalizationError::OutOfOrder { timestamp: inc.timestamp, last });
        }
        if !inc.relative_pose.is_valid() {
            return Err(LocalizationError::InvalidIncrement);
        }
        let mut accumulated = self.state.accumulated.compose(&inc.relative_pose);
        self.compositions += 1;
        if self.compositions % RENORMALIZE_EVERY == 0 {
            accumulated = accumulated.renormalized();
        }
        self.state = AnchoredPose::with_accumulated(self.state.anchor, accumulated);
        if self.history.len() == INCREMENT_WINDOW {
            self.evicted_until = self.history.pop_front().map(|i| i.timestamp);
        }
        self.history.push_back(inc);
        Ok(self.state.output)
    }

    /// Re-anchors on `fix`, the global pose at `fix_timestamp`.
    ///
    /// Increments recorded after `fix_timestamp` are replayed on top of
    /// the fix, so the output is the fix carried forward to the present.
    pub fn apply_global_fix(&mut self, fix: &Pose, fix_timestamp: f64) -> Result<Pose, LocalizationError> {
        if !fix.is_valid() {
            return Err(LocalizationError::InvalidFix);
        }
        let latest = self.latest_timestamp();
        if fix_timestamp > latest {
            return Err(LocalizationError::FutureFix { fix_timestamp, latest });
        }
        if fix_timestamp < self.start_timestamp || self.evicted_until.is_some_and(|t| t > fix_timestamp) {
            return Err(LocalizationError::StaleFix { fix_timestamp });
        }
        let mut accumulated = Pose::identity();
        for inc in self.history.iter().filter(|i| i.timestamp > fix_timestamp) {
            accumulated = accumulated.compose(&inc.relative_pose);
        }
        let next = AnchoredPose::with_accumulated(*fix, accumulated.renormalized());
        if let Some(gate) = self.max_fix_jump {
            let jump = next.output.translation_distance(&self.state.output);
            if jump > gate {
                return Err(LocalizationError::Gated { jump });
            }
        }
        self.state = next;
        Ok(self.state.output)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Seconds between relocalization attempts.
    pub reloc_period: f64,
    pub relocalization_enabled: bool,
    /// Frames between starting a relocalization and applying its result.
    pub fix_latency_frames: usize,
    pub max_fix_jump: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { reloc_period: 0.5, relocalization_enabled: true, fix_latency_frames: 0, max_fix_jump: None }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.reloc_period > 0.0) || !self.reloc_period.is_finite() {
            return Err("reloc_period must be > 0");
        }
        if self.max_fix_jump.is_some_and(|g| !(g > 0.0)) {
            return Err("max_fix_jump must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub pipeline: PipelineConfig,
    pub extraction: ExtractionParams,
    pub association: AssociationParams,
    pub reloc: RelocParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            extraction: ExtractionParams::default(),
            association: AssociationParams::default(),
            reloc: RelocParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    FixApplied { residual_rms: f64, inliers: usize },
    RelocFailed(RelocFailure),
    FixRejected(LocalizationError),
    IncrementRejected(LocalizationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineEvent {
    pub frame: usize,
    pub timestamp: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOutput {
    pub trajectory: Vec<(f64, Pose)>,
    pub events: Vec<PipelineEvent>,
}

impl PipelineOutput {
    pub fn fixes_applied(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::FixApplied { .. })).count()
    }
}

/// Runs drift correction over a recorded session.
///
/// `odometry[k]` is the odometry pose of `frames[k]`; increments are taken
/// between consecutive poses and the first pose is the initial anchor.
/// Every `reloc_period` seconds the current frame's clusters, in the sensor
/// frame, are relocalized against `global_map`; the resulting pose is the
/// vehicle's global pose at that frame and is applied
/// `fix_latency_frames` frames later. Failures are recorded as events.
pub fn run_pipeline(frames: &[Frame], odometry: &[Pose], global_map: &ClusterMap, params: &PipelineParams) -> PipelineOutput {
    let n = frames.len().min(odometry.len());
    let mut out = PipelineOutput::default();
    if n == 0 {
        return out;
    }
    let cfg = &params.pipeline;
    let mut loc = Localizer::new(odometry[0], frames[0].timestamp).with_gate(cfg.max_fix_jump);
    let mut pending: VecDeque<(usize, usize, Pose, f64, usize)> = VecDeque::new();
    let mut last_attempt: Option<f64> = None;
    let index = cfg.relocalization_enabled.then(|| AssociationIndex::new(global_map, params.association.search_radius));

    for k in 0..n {
        let ts = frames[k].timestamp;
        if k > 0 {
            let inc = OdometryIncrement { timestamp: ts, relative_pose: odometry[k - 1].inverse().compose(&odometry[k]) };
            if let Err(e) = loc.apply_increment(inc) {
                out.events.push(PipelineEvent { frame: k, timestamp: ts, kind: EventKind::IncrementRejected(e) });
            }
        }

        // small slack so a period of exactly 0.5 s at 10 Hz is not missed to rounding
        let due = last_attempt.is_none_or(|t| ts - t >= cfg.reloc_period - 1e-9);
        if let (Some(index), true) = (&index, due) {
            last_attempt = Some(ts);
            let clusters = extract_clusters(&frames[k], &params.extraction);
            let local = build_local_map(&clusters, &Pose::identity());
            match relocalize_with_index(&local, global_map, index, &params.association, &params.reloc) {
                Ok(r) => pending.push_back((k + cfg.fix_latency_frames, k, r.pose, r.residual_rms, r.inlier_pairs.len())),
                Err(f) => out.events.push(PipelineEvent { frame: k, timestamp: ts, kind: EventKind::RelocFailed(f) }),
            }
        }

        while pending.front().is_some_and(|p| p.0 <= k) {
            let (_, src_frame, pose, residual_rms, inliers) = pending.pop_front().expect("checked");
            let fix_ts = frames[src_frame].timestamp;
            let kind = match loc.apply_global_fix(&pose, fix_ts) {
                Ok(_) => EventKind::FixApplied { residual_rms, inliers },
                Err(e) => EventKind::FixRejected(e),
            };
            out.events.push(PipelineEvent { frame: src_frame, timestamp: fix_ts, kind });
        }
        out.trajectory.push((ts, loc.output()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(t: f64) -> OdometryIncrement {
        OdometryIncrement { timestamp: t, relative_pose: Pose::from_translation(1.0, 0.0, 0.0) }
    }

    #[test]
    fn increments_compose() {
        let mut loc = Localizer::new(Pose::identity(), 0.0);
        for t in 1..=3 {
            loc.apply_increment(step(t as f64)).unwrap();
        }
        assert!((loc.output().translation() - nalgebra::Vector3::new(3.0, 0.0, 0.0)).norm() < 1e-12);

        let mut loc = Localizer::new(Pose::from_translation(10.0, 0.0, 0.0), 0.0);
        loc.apply_increment(OdometryIncrement { timestamp: 1.0, relative_pose: Pose::identity() }).unwrap();
        assert_eq!(loc.output().translation().x, 10.0);
    }

    #[test]
    fn out_of_order_rejected() {
        let mut loc = Localizer::new(Pose::identity(), 0.0);
        loc.apply_increment(step(2.0)).unwrap();
        assert!(matches!(loc.apply_increment(step(1.0)), Err(LocalizationError::OutOfOrder { .. })));
    }

    #[test]
    fn fix_at_current_time_snaps() {
        let mut loc = Localizer::new(Pose::identity(), 0.0);
        for t in 1..=5 {
            loc.apply_increment(step(t as f64)).unwrap();
        }
        let fix = Pose::from_xy_yaw(4.0, 0.3, 0.01);
        assert_eq!(loc.apply_global_fix(&fix, 5.0).unwrap(), fix);
        let same = loc.output();
        assert_eq!(loc.apply_global_fix(&same, 5.0).unwrap(), same);
    }

    #[test]
    fn late_fix_replays_later_increments() {
        let mut loc = Localizer::new(Pose::identity(), 0.0);
        for t in 1..=10 {
            loc.apply_increment(step(t as f64)).unwrap();
        }
        let fix = Pose::from_xy_yaw(7.0, 1.0, 0.0);
        let out = loc.apply_global_fix(&fix, 7.0).unwrap();
        assert!((out.translation() - nalgebra::Vector3::new(10.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stale_and_future_fixes() {
        let mut loc = Localizer::new(Pose::identity(), 0.0);
        for t in 1..=(INCREMENT_WINDOW + 10) {
            loc.apply_increment(step(t as f64)).unwrap();
        }
        assert!(matches!(loc.apply_global_fix(&Pose::identity(), 5.0), Err(LocalizationError::StaleFix { .. })));
        assert!(loc.apply_global_fix(&Pose::identity(), 10.0).is_ok());
        assert!(matches!(loc.apply_global_fix(&Pose::identity(), 1e6), Err(LocalizationError::FutureFix { .. })));
    }

    #[test]
    fn gate_blocks_large_jumps() {
        let mut loc = Localizer::new(Pose::identity(), 0.0).with_gate(Some(5.0));
        loc.apply_increment(step(1.0)).unwrap();
        assert!(matches!(loc.apply_global_fix(&Pose::from_translation(60.0, 0.0, 0.0), 1.0), Err(LocalizationError::Gated { .. })));
        assert!(loc.apply_global_fix(&Pose::from_translation(2.0, 0.0, 0.0), 1.0).is_ok());
    }

    #[test]
    fn disabled_pipeline_is_odometry() {
        let frames: Vec<Frame> = (0..20).map(|k| Frame::new(k as f64 * 0.1, Vec::new())).collect();
        let odom: Vec<Pose> = (0..20).map(|k| Pose::from_xy_yaw(k as f64, 0.1 * k as f64, 0.02 * k as f64)).collect();
        let params = PipelineParams { pipeline: PipelineConfig { relocalization_enabled: false, ..Default::default() }, ..Default::default() };
        let out = run_pipeline(&frames, &odom, &ClusterMap::new(), &params);
        for ((_, p), o) in out.trajectory.iter().zip(&odom) {
            assert!(p.translation_distance(o) < 1e-9);
        }
        assert!(out.events.is_empty());
    }
}
