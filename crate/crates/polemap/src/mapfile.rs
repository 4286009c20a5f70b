//! Cluster map persistence.
//!
//! The map itself is a line-oriented text file:
//!
//! ```text
//! polemap-map 1
//! next_id 3
//! labels 2
//! 80 pole pole
//! 71 trunk trunk
//! clusters 1
//! 2 pole 1.5 -3 0.75 1.5 -3 60
//! end
//! ```
//!
//! Cluster lines are `id label c3x c3y c3z c2x c2y point_count`. Numbers
//! use the shortest decimal form that parses back to the same `f64`.
//! Member points go to an optional binary sidecar next to the map
//! (`<map>.points`).

use std::fs;
use std::path::{Path, PathBuf};

use polemap_core::cluster::{LabelDictionary, LabelEntry};
use polemap_core::{Cluster, ClusterId, ClusterMap, LabeledPoint, SemanticLabel};

use crate::dataset::in_file;
use crate::error::{Error, FormatError};

pub const MAP_VERSION: u32 = 1;
const MAGIC: &str = "polemap-map";
const SIDECAR_MAGIC: &[u8; 4] = b"PMPT";

pub fn sidecar_path(map_path: &Path) -> PathBuf {
    let mut s = map_path.as_os_str().to_owned();
    s.push(".points");
    PathBuf::from(s)
}

pub fn encode_map(map: &ClusterMap, labels: &LabelDictionary) -> Result<String, FormatError> {
    let mut s = format!("{MAGIC} {MAP_VERSION}\nnext_id {}\nlabels {}\n", map.next_id(), labels.entries().len());
    for e in labels.entries() {
        if e.name.is_empty() || e.name.chars().any(char::is_whitespace) {
            return Err(FormatError::Other(format!("label name `{}` must be one non-empty word", e.name)));
        }
        s.push_str(&format!("{} {} {}\n", e.class_id, e.name, e.label));
    }
    s.push_str(&format!("clusters {}\n", map.len()));
    for c in map.iter() {
        let [x, y, z] = c.centroid3d();
        let [u, v] = c.centroid2d();
        s.push_str(&format!("{} {} {x} {y} {z} {u} {v} {}\n", c.id().0, c.label(), c.point_count()));
    }
    s.push_str("end\n");
    Ok(s)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), FormatError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l.split_whitespace().collect()))
            }
            None => Err(FormatError::line(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    /// `keyword <count>` header line.
    fn header(&mut self, keyword: &str) -> Result<u64, FormatError> {
        let (n, f) = self.next(keyword)?;
        match f.as_slice() {
            [k, v] if *k == keyword => v.parse().map_err(|_| FormatError::line(n, format!("bad {keyword} value `{v}`"))),
            _ => Err(FormatError::line(n, format!("expected `{keyword} <n>`"))),
        }
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, FormatError> {
    s.parse().map_err(|_| FormatError::line(line, format!("bad number `{s}`")))
}

fn label(line: usize, s: &str) -> Result<SemanticLabel, FormatError> {
    SemanticLabel::parse(s).ok_or_else(|| FormatError::line(line, format!("unknown label `{s}`")))
}

pub fn decode_map(text: &str) -> Result<(ClusterMap, LabelDictionary), FormatError> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let (n, f) = lines.next("header")?;
    match f.as_slice() {
        [m, v] if *m == MAGIC => {
            if *v != MAP_VERSION.to_string() {
                return Err(FormatError::Version { found: v.to_string(), expected: MAP_VERSION });
            }
        }
        _ => return Err(FormatError::line(n, "not a polemap map file")),
    }
    let next_id = lines.header("next_id")?;

    let n_labels = lines.header("labels")?;
    let mut entries = Vec::new();
    for _ in 0..n_labels {
        let (n, f) = lines.next("label entry")?;
        let [id, name, l] = f.as_slice() else { return Err(FormatError::line(n, "expected `class_id name label`")) };
        entries.push(LabelEntry { class_id: num(n, id)?, name: name.to_string(), label: label(n, l)? });
    }
    let labels = LabelDictionary::new(entries).map_err(|e| FormatError::line(lines.last, e.to_string()))?;

    let n_clusters = lines.header("clusters")?;
    let mut clusters = Vec::new();
    for _ in 0..n_clusters {
        let (n, f) = lines.next("cluster record")?;
        let [id, l, x, y, z, u, v, count] = f.as_slice() else {
            return Err(FormatError::line(n, "expected `id label c3x c3y c3z c2x c2y count`"));
        };
        let c3: [f64; 3] = [num(n, x)?, num(n, y)?, num(n, z)?];
        let c2: [f64; 2] = [num(n, u)?, num(n, v)?];
        if c2[0].to_bits() != c3[0].to_bits() || c2[1].to_bits() != c3[1].to_bits() {
            return Err(FormatError::line(n, "2D centroid differs from the 3D centroid"));
        }
        let c = Cluster::from_summary(ClusterId(num(n, id)?), label(n, l)?, c3, num(n, count)?)
            .map_err(|e| FormatError::line(n, e.to_string()))?;
        clusters.push(c);
    }
    let (n, f) = lines.next("end")?;
    if f.as_slice() != ["end"] {
        return Err(FormatError::line(n, "expected `end`"));
    }
    if let Some((i, _)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(FormatError::line(i + 1, "trailing content after `end`"));
    }
    let map = ClusterMap::from_parts(clusters, next_id)
        .map_err(|id| FormatError::Other(format!("cluster id {} is duplicated or not below next_id {next_id}", id.0)))?;
    Ok((map, labels))
}

fn label_code(l: SemanticLabel) -> u32 {
    match l {
        SemanticLabel::Pole => 0,
        SemanticLabel::Trunk => 1,
        SemanticLabel::Other(id) => 0x1_0000 | id as u32,
    }
}

fn code_label(c: u32) -> Option<SemanticLabel> {
    match c {
        0 => Some(SemanticLabel::Pole),
        1 => Some(SemanticLabel::Trunk),
        c if c >> 16 == 1 => Some(SemanticLabel::Other((c & 0xffff) as u16)),
        _ => None,
    }
}

/// Member points of every cluster: magic, version, cluster count, then per
/// cluster `id`, `count` and `count` records of `x y z` (`f64`) plus a
/// `u32` label code, all little-endian.
pub fn encode_sidecar(map: &ClusterMap) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&MAP_VERSION.to_le_bytes());
    out.extend_from_slice(&(map.len() as u64).to_le_bytes());
    for c in map.iter() {
        out.extend_from_slice(&c.id().0.to_le_bytes());
        out.extend_from_slice(&(c.points().len() as u64).to_le_bytes());
        for p in c.points() {
            for v in [p.x, p.y, p.z] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&label_code(p.label).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        let end = self.pos.checked_add(N).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(FormatError::Byte { offset: self.pos, message: "truncated sidecar".into() });
        };
        let out = self.bytes[self.pos..end].try_into().expect("N bytes");
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        self.take::<8>().map(u64::from_le_bytes)
    }
}

pub fn decode_sidecar(bytes: &[u8]) -> Result<Vec<(ClusterId, Vec<LabeledPoint>)>, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>()? != SIDECAR_MAGIC {
        return Err(FormatError::Byte { offset: 0, message: "not a point sidecar".into() });
    }
    let version = u32::from_le_bytes(r.take::<4>()?);
    if version != MAP_VERSION {
        return Err(FormatError::Version { found: version.to_string(), expected: MAP_VERSION });
    }
    let n = r.u64()?;
    let mut out = Vec::new();
    for _ in 0..n {
        let id = ClusterId(r.u64()?);
        let count = r.u64()?;
        // each point needs 28 bytes; refuse counts the buffer cannot hold
        if count.saturating_mul(28) > (bytes.len() - r.pos) as u64 {
            return Err(FormatError::Byte { offset: r.pos, message: "truncated sidecar".into() });
        }
        let mut pts = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let x = f64::from_le_bytes(r.take::<8>()?);
            let y = f64::from_le_bytes(r.take::<8>()?);
            let z = f64::from_le_bytes(r.take::<8>()?);
            let at = r.pos;
            let code = u32::from_le_bytes(r.take::<4>()?);
            let l = code_label(code).ok_or(FormatError::Byte { offset: at, message: format!("bad label code {code}") })?;
            pts.push(LabeledPoint::new(x, y, z, l));
        }
        out.push((id, pts));
    }
    if r.pos != bytes.len() {
        return Err(FormatError::Byte { offset: r.pos, message: "trailing bytes".into() });
    }
    Ok(out)
}

/// Attaches sidecar points to the summary clusters of `map`.
pub fn attach_points(map: &ClusterMap, points: Vec<(ClusterId, Vec<LabeledPoint>)>) -> Result<ClusterMap, FormatError> {
    if points.len() != map.len() {
        return Err(FormatError::Other(format!("sidecar has {} clusters, map has {}", points.len(), map.len())));
    }
    let mut clusters = Vec::with_capacity(map.len());
    for (c, (id, pts)) in map.iter().zip(points) {
        if id != c.id() {
            return Err(FormatError::Other(format!("sidecar cluster {} where map has {}", id.0, c.id().0)));
        }
        let summary = Cluster::from_summary(c.id(), c.label(), c.centroid3d(), c.point_count()).expect("loaded cluster");
        clusters.push(summary.with_points(pts).map_err(|e| FormatError::Other(format!("cluster {}: {e}", id.0)))?);
    }
    ClusterMap::from_parts(clusters, map.next_id()).map_err(|id| FormatError::Other(format!("bad cluster id {}", id.0)))
}

/// Writes the map, plus the point sidecar when `with_points` is set.
pub fn save_map(path: &Path, map: &ClusterMap, labels: &LabelDictionary, with_points: bool) -> Result<(), Error> {
    let text = encode_map(map, labels)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    if with_points {
        let side = sidecar_path(path);
        fs::write(&side, encode_sidecar(map)).map_err(|e| Error::io(&side, e))?;
    }
    Ok(())
}

/// Reads a map and, if present, its point sidecar.
pub fn load_map(path: &Path) -> Result<(ClusterMap, LabelDictionary), Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (map, labels) = decode_map(&text).map_err(|e| in_file(path, e))?;
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok((map, labels));
    }
    let bytes = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let points = decode_sidecar(&bytes).map_err(|e| in_file(&side, e))?;
    Ok((attach_points(&map, points).map_err(|e| in_file(&side, e))?, labels))
}
