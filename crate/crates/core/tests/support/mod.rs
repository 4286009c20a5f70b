//! Test-only reference implementations and scene builders.
#![allow(dead_code)]

use polemap_core::association::AssociationParams;
use polemap_core::{Cluster, ClusterId, ClusterMap, LabeledPoint, MatchPair, Pose, SemanticLabel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct OracleEdge {
    neighbor: u64,
    length: f64,
    v: [f64; 2],
    label: SemanticLabel,
}

/// Every neighbour within `sr`, found by scanning all clusters.
pub fn oracle_edges(map: &ClusterMap, id: ClusterId, sr: f64) -> Vec<OracleEdge> {
    let a = map.get(id).unwrap().centroid2d();
    let mut out: Vec<OracleEdge> = map
        .iter()
        .filter(|c| c.id() != id)
        .filter_map(|c| {
            let b = c.centroid2d();
            let v = [b[0] - a[0], b[1] - a[1]];
            let length = v[0].hypot(v[1]);
            (length > 0.0 && length <= sr).then_some(OracleEdge { neighbor: c.id().0, length, v, label: c.label() })
        })
        .collect();
    out.sort_by(|x, y| x.length.total_cmp(&y.length).then(x.neighbor.cmp(&y.neighbor)));
    out
}

fn wrap360(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r >= 360.0 { 0.0 } else { r }
}

/// `(d, theta)` of `sub` seen from `edge`, theta measured clockwise.
pub fn oracle_feature(edge: &OracleEdge, sub: &OracleEdge) -> (f64, f64) {
    let ccw = sub.v[1].atan2(sub.v[0]) - edge.v[1].atan2(edge.v[0]);
    (sub.length, wrap360(-ccw.to_degrees()))
}

/// Distance between the 2D vectors `(d cos θ, -d sin θ)`.
pub fn vector_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ta, tb) = (a.1.to_radians(), b.1.to_radians());
    let va = [a.0 * ta.cos(), -a.0 * ta.sin()];
    let vb = [b.0 * tb.cos(), -b.0 * tb.sin()];
    (va[0] - vb[0]).hypot(va[1] - vb[1])
}

fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

/// Edges of one anchor plus every sub-edge feature relative to every edge.
pub struct OracleStar {
    pub edges: Vec<OracleEdge>,
    /// `features[i][a]` is sub-edge `a` seen from edge `i`.
    pub features: Vec<Vec<(f64, f64)>>,
    /// The same features as vectors `(d cos θ, -d sin θ)`.
    pub vectors: Vec<Vec<[f64; 2]>>,
}

impl OracleStar {
    pub fn new(edges: Vec<OracleEdge>) -> Self {
        let features: Vec<Vec<(f64, f64)>> = edges.iter().map(|e| edges.iter().map(|s| oracle_feature(e, s)).collect()).collect();
        let vectors = features
            .iter()
            .map(|row| row.iter().map(|&(d, t)| [d * t.to_radians().cos(), -d * t.to_radians().sin()]).collect())
            .collect();
        Self { edges, features, vectors }
    }
}

/// Distance of edge pair `(i, j)` by exhaustive sub-edge enumeration.
pub fn oracle_pair_distance(l: &OracleStar, i: usize, g: &OracleStar, j: usize, p: &AssociationParams) -> Option<f64> {
    let (le, ge) = (&l.edges, &g.edges);
    let mut found = Vec::new();
    for (a, sl) in le.iter().enumerate() {
        if a == i {
            continue;
        }
        let fl = l.features[i][a];
        for (b, sg) in ge.iter().enumerate() {
            if b == j || sl.label != sg.label {
                continue;
            }
            let fg = g.features[j][b];
            if !((fl.0 - fg.0).abs() < p.max_length_error) || !(circ(fl.1, fg.1) < p.max_angle_error_deg) {
                continue;
            }
            let (va, vb) = (l.vectors[i][a], g.vectors[j][b]);
            let d = (va[0] - vb[0]).hypot(va[1] - vb[1]);
            if d < p.max_sub_edge_distance {
                found.push((d, a, b));
            }
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let (mut used_a, mut used_b) = (vec![false; le.len()], vec![false; ge.len()]);
    let (mut k, mut sum) = (0usize, 0.0);
    for (d, a, b) in found {
        if !used_a[a] && !used_b[b] {
            used_a[a] = true;
            used_b[b] = true;
            k += 1;
            sum += d;
        }
    }
    if k < p.min_sub_edge_matches || k == 0 {
        return None;
    }
    Some(((le.len() - 1) as f64 / k as f64).ln() * sum / k as f64)
}

/// Matched edge count of one cluster pair. With `unlimited` every global
/// edge is a candidate; otherwise the `candidates` closest in length.
pub fn oracle_matched_edges(l: &OracleStar, g: &OracleStar, p: &AssociationParams, unlimited: bool) -> usize {
    let ge = &g.edges;
    let mut k = 0;
    for (i, e) in l.edges.iter().enumerate() {
        let mut idx: Vec<usize> = (0..ge.len()).collect();
        if !unlimited {
            idx.sort_by(|&a, &b| (ge[a].length - e.length).abs().total_cmp(&(ge[b].length - e.length).abs()).then(a.cmp(&b)));
            idx.truncate(p.candidates);
        }
        let best = idx.into_iter().filter_map(|j| oracle_pair_distance(l, i, g, j, p)).fold(f64::INFINITY, f64::min);
        if best < p.max_edge_distance {
            k += 1;
        }
    }
    k
}

/// Brute-force association followed by the one-to-one selection rules.
pub fn oracle_associate(local: &ClusterMap, global: &ClusterMap, p: &AssociationParams, unlimited: bool) -> Vec<MatchPair> {
    let g_edges: Vec<(ClusterId, SemanticLabel, OracleStar)> =
        global.iter().map(|c| (c.id(), c.label(), OracleStar::new(oracle_edges(global, c.id(), p.search_radius)))).collect();
    let mut picks: Vec<MatchPair> = Vec::new();
    for cl in local.iter() {
        let le = OracleStar::new(oracle_edges(local, cl.id(), p.search_radius));
        let mut best: Option<MatchPair> = None;
        for (gid, glabel, ge) in &g_edges {
            if *glabel != cl.label() {
                continue;
            }
            let k = oracle_matched_edges(&le, ge, p, unlimited);
            if k >= p.min_edge_matches && best.map_or(true, |b| k > b.matched_edges) {
                best = Some(MatchPair { local: cl.id(), global: *gid, matched_edges: k });
            }
        }
        picks.extend(best);
    }
    let mut out: Vec<MatchPair> = Vec::new();
    for m in &picks {
        let beaten = picks.iter().any(|o| {
            o.global == m.global && (o.matched_edges > m.matched_edges || (o.matched_edges == m.matched_edges && o.local < m.local))
        });
        if !beaten {
            out.push(*m);
        }
    }
    out.sort_by_key(|m| m.local);
    out
}

pub fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * sigma
}

/// Deterministic value in `[0, 1)` for index `k`.
fn scatter(k: usize, salt: u64) -> f64 {
    let mut z = (k as u64).wrapping_add(salt).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
}

/// Points scattered irregularly over a 0.12 m radius, 4 m tall pole at
/// `(x, y)`. The same `points` always gives the same shape.
pub fn pole_cluster(x: f64, y: f64, label: SemanticLabel, points: usize) -> Cluster {
    let pts = (0..points)
        .map(|k| {
            let a = scatter(k, 1) * std::f64::consts::TAU;
            LabeledPoint::new(x + 0.12 * a.cos(), y + 0.12 * a.sin(), 4.0 * scatter(k, 2), label)
        })
        .collect();
    Cluster::new(ClusterId(0), label, pts).unwrap()
}

/// Random landmark positions in a square, at least `spacing` apart.
pub fn random_layout(rng: &mut ChaCha8Rng, n: usize, half_width: f64, spacing: f64) -> Vec<([f64; 2], SemanticLabel)> {
    let mut out: Vec<([f64; 2], SemanticLabel)> = Vec::new();
    while out.len() < n {
        let p = [rng.random_range(-half_width..half_width), rng.random_range(-half_width..half_width)];
        if out.iter().all(|(q, _)| (p[0] - q[0]).hypot(p[1] - q[1]) >= spacing) {
            let label = if rng.random_bool(0.5) { SemanticLabel::Pole } else { SemanticLabel::Trunk };
            out.push((p, label));
        }
    }
    out
}

pub fn map_from_layout(layout: &[([f64; 2], SemanticLabel)], points: usize) -> ClusterMap {
    ClusterMap::from_clusters(layout.iter().map(|(p, l)| pole_cluster(p[0], p[1], *l, points)))
}

/// Local map seeing `keep` of the global landmarks through `truth` (local
/// to global), each cluster displaced by planar noise of `sigma`.
/// Returns the map and, per local id, the global id it came from.
pub fn planted_local(
    layout: &[([f64; 2], SemanticLabel)],
    truth: &Pose,
    keep: &[usize],
    sigma: f64,
    points: usize,
    rng: &mut ChaCha8Rng,
) -> (ClusterMap, Vec<u64>) {
    let inv = truth.inverse();
    let mut clusters = Vec::new();
    for &g in keep {
        let (p, l) = layout[g];
        let q = inv.transform_xyz([p[0], p[1], 0.0]);
        clusters.push(pole_cluster(q[0] + gaussian(rng, sigma), q[1] + gaussian(rng, sigma), l, points));
    }
    (ClusterMap::from_clusters(clusters), keep.iter().map(|&g| g as u64).collect())
}

pub fn random_planar_pose(rng: &mut ChaCha8Rng, max_yaw_deg: f64, max_shift: f64) -> Pose {
    let yaw = rng.random_range(-max_yaw_deg..=max_yaw_deg).to_radians();
    let r = rng.random_range(0.0..=max_shift);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    Pose::from_xy_yaw(r * a.cos(), r * a.sin(), yaw)
}

