//! Frame and pose files.
//!
//! A dataset directory holds `velodyne/NNNNNN.bin` (little-endian
//! `f32` x, y, z, intensity per point), `labels/NNNNNN.label` (one
//! little-endian `u32` per point, class id in the lower 16 bits) and a
//! `poses.txt` trajectory in TUM format. Simulated datasets add
//! `odometry.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use polemap_core::cluster::LabelDictionary;
use polemap_core::nalgebra::Vector3;
use polemap_core::{Frame, LabeledPoint, Pose};

use crate::error::{Error, FormatError};

pub const POINT_RECORD: usize = 16;
pub const LABEL_RECORD: usize = 4;
pub const QUATERNION_TOLERANCE: f64 = 1e-6;

/// One raw point as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

pub fn encode_points(points: &[RawPoint]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * POINT_RECORD);
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_points(bytes: &[u8]) -> Result<Vec<RawPoint>, FormatError> {
    if bytes.len() % POINT_RECORD != 0 {
        return Err(FormatError::Size { what: "point file", len: bytes.len(), record: POINT_RECORD });
    }
    let f = |c: &[u8]| f32::from_le_bytes(c.try_into().expect("4-byte chunk"));
    Ok(bytes
        .chunks_exact(POINT_RECORD)
        .map(|r| RawPoint { x: f(&r[0..4]), y: f(&r[4..8]), z: f(&r[8..12]), intensity: f(&r[12..16]) })
        .collect())
}

pub fn encode_labels(labels: &[u32]) -> Vec<u8> {
    labels.iter().flat_map(|l| l.to_le_bytes()).collect()
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u32>, FormatError> {
    if bytes.len() % LABEL_RECORD != 0 {
        return Err(FormatError::Size { what: "label file", len: bytes.len(), record: LABEL_RECORD });
    }
    Ok(bytes.chunks_exact(LABEL_RECORD).map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk"))).collect())
}

/// Joins decoded points and labels into a frame.
pub fn frame_from_parts(timestamp: f64, points: &[RawPoint], labels: &[u32], dict: &LabelDictionary) -> Result<Frame, FormatError> {
    if points.len() != labels.len() {
        return Err(FormatError::CountMismatch { points: points.len(), labels: labels.len() });
    }
    let mut out = Vec::with_capacity(points.len());
    for (k, (p, &l)) in points.iter().zip(labels).enumerate() {
        let q = LabeledPoint::new(p.x as f64, p.y as f64, p.z as f64, dict.decode((l & 0xffff) as u16));
        if !q.is_finite() {
            return Err(FormatError::Byte { offset: k * POINT_RECORD, message: "non-finite coordinate".into() });
        }
        out.push(q);
    }
    Ok(Frame::new(timestamp, out))
}

/// Splits a frame into its on-disk records, intensity zero.
pub fn frame_to_parts(frame: &Frame, dict: &LabelDictionary) -> (Vec<RawPoint>, Vec<u32>) {
    frame
        .points
        .iter()
        .map(|p| {
            (RawPoint { x: p.x as f32, y: p.y as f32, z: p.z as f32, intensity: 0.0 }, dict.encode(p.label) as u32)
        })
        .unzip()
}

/// Parses a TUM trajectory: `timestamp tx ty tz qx qy qz qw` per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_poses(text: &str) -> Result<Vec<(f64, Pose)>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(FormatError::line(line_no, format!("expected 8 fields, found {}", fields.len())));
        }
        let mut v = [0.0f64; 8];
        for (slot, s) in v.iter_mut().zip(&fields) {
            *slot = s.parse().map_err(|_| FormatError::line(line_no, format!("bad number `{s}`")))?;
            if !slot.is_finite() {
                return Err(FormatError::line(line_no, format!("non-finite value `{s}`")));
            }
        }
        let norm = (v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]).sqrt();
        if (norm - 1.0).abs() > QUATERNION_TOLERANCE {
            return Err(FormatError::line(line_no, format!("quaternion norm {norm} is not 1")));
        }
        if out.last().is_some_and(|&(prev, _): &(f64, Pose)| v[0] <= prev) {
            return Err(FormatError::line(line_no, "timestamps must increase"));
        }
        let pose = Pose::from_quaternion_unchecked(Vector3::new(v[1], v[2], v[3]), v[4], v[5], v[6], v[7]);
        out.push((v[0], pose));
    }
    Ok(out)
}

/// Writes a TUM trajectory with shortest round-trip decimal numbers.
pub fn format_poses(poses: &[(f64, Pose)]) -> String {
    let mut s = String::new();
    for (t, p) in poses {
        let tr = p.translation();
        let q = p.rotation();
        let q = q.quaternion();
        s.push_str(&format!("{t} {} {} {} {} {} {} {}\n", tr.x, tr.y, tr.z, q.i, q.j, q.k, q.w));
    }
    s
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Tags a decoding error with the file it came from.
pub(crate) fn in_file(path: &Path, e: FormatError) -> Error {
    Error::Format(FormatError::Other(format!("{}: {e}", path.display())))
}

pub fn load_poses(path: &Path) -> Result<Vec<(f64, Pose)>, Error> {
    parse_poses(&read_text(path)?).map_err(|e| in_file(path, e))
}

pub fn save_poses(path: &Path, poses: &[(f64, Pose)]) -> Result<(), Error> {
    write(path, format_poses(poses).as_bytes())
}

/// A dataset directory on disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
}

impl Dataset {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn points_path(&self, k: usize) -> PathBuf {
        self.root.join("velodyne").join(format!("{k:06}.bin"))
    }

    pub fn labels_path(&self, k: usize) -> PathBuf {
        self.root.join("labels").join(format!("{k:06}.label"))
    }

    pub fn poses_path(&self) -> PathBuf {
        self.root.join("poses.txt")
    }

    pub fn odometry_path(&self) -> PathBuf {
        self.root.join("odometry.txt")
    }

    /// Ground-truth (or reference) poses, one per frame.
    pub fn poses(&self) -> Result<Vec<(f64, Pose)>, Error> {
        load_poses(&self.poses_path())
    }

    /// Odometry poses if present, else the reference poses.
    pub fn odometry(&self) -> Result<Vec<(f64, Pose)>, Error> {
        let p = self.odometry_path();
        if p.exists() {
            load_poses(&p)
        } else {
            self.poses()
        }
    }

    /// Number of consecutive point files starting at 0.
    pub fn frame_count(&self) -> usize {
        (0..).take_while(|&k| self.points_path(k).is_file()).count()
    }

    pub fn load_frame(&self, k: usize, timestamp: f64, dict: &LabelDictionary) -> Result<Frame, Error> {
        let (pp, lp) = (self.points_path(k), self.labels_path(k));
        let points = decode_points(&read(&pp)?).map_err(|e| in_file(&pp, e))?;
        let labels = decode_labels(&read(&lp)?).map_err(|e| in_file(&lp, e))?;
        frame_from_parts(timestamp, &points, &labels, dict).map_err(|e| in_file(&pp, e))
    }

    /// Loads every frame, stamped with the reference pose timestamps.
    pub fn load_frames(&self, dict: &LabelDictionary) -> Result<Vec<Frame>, Error> {
        let poses = self.poses()?;
        let n = self.frame_count();
        if n != poses.len() {
            return Err(Error::Format(FormatError::Other(format!(
                "{}: {n} frames but {} poses",
                self.root.display(),
                poses.len()
            ))));
        }
        poses.iter().enumerate().map(|(k, (t, _))| self.load_frame(k, *t, dict)).collect()
    }

    /// Writes frames, reference poses and optional odometry.
    pub fn write(&self, frames: &[Frame], poses: &[(f64, Pose)], odometry: Option<&[(f64, Pose)]>, dict: &LabelDictionary) -> Result<(), Error> {
        for dir in [self.root.join("velodyne"), self.root.join("labels")] {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        for (k, f) in frames.iter().enumerate() {
            let (points, labels) = frame_to_parts(f, dict);
            write(&self.points_path(k), &encode_points(&points))?;
            write(&self.labels_path(k), &encode_labels(&labels))?;
        }
        save_poses(&self.poses_path(), poses)?;
        if let Some(o) = odometry {
            save_poses(&self.odometry_path(), o)?;
        }
        Ok(())
    }
}
