//! Cluster association by planar edge / sub-edge signatures.
//!
//! Every cluster is described by the edges to its neighbours within the
//! search radius. Two clusters of the same label match when enough of their
//! edges match, and an edge pair matches when the remaining edges (its
//! sub-edges), expressed as length plus clockwise angle relative to the
//! edge, line up between the two maps.
//!
//! Only planar geometry is used: lengths and relative angles are invariant
//! under rotation and translation of either map.

use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float as _;
use nalgebra::Vector2;

use crate::cluster::{ClusterId, SemanticLabel};
use crate::geometry::{circular_difference_deg, clockwise_angle_deg};
use crate::map::ClusterMap;

/// Thresholds for sub-edge, edge and cluster matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationParams {
    /// Neighbourhood radius (SR), meters.
    pub search_radius: f64,
    /// Maximum sub-edge length difference (δ_d), meters.
    pub max_length_error: f64,
    /// Maximum sub-edge angle difference (δ_θ), degrees.
    pub max_angle_error_deg: f64,
    /// Maximum sub-edge distance (δ_se), meters.
    pub max_sub_edge_distance: f64,
    /// Maximum distance of the best candidate edge pair (δ_e), meters.
    pub max_edge_distance: f64,
    /// Minimum matched sub-edges for an edge pair (N_se).
    pub min_sub_edge_matches: usize,
    /// Minimum matched edges for a cluster pair (N_e).
    pub min_edge_matches: usize,
    /// Candidate global edges examined per local edge (n).
    pub candidates: usize,
}

impl Default for AssociationParams {
    fn default() -> Self {
        Self {
            search_radius: 50.0,
            max_length_error: 0.3,
            max_angle_error_deg: 10.0,
            max_sub_edge_distance: 0.2,
            max_edge_distance: 0.25,
            min_sub_edge_matches: 5,
            min_edge_matches: 5,
            candidates: 5,
        }
    }
}

impl AssociationParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        let positive = [
            self.search_radius,
            self.max_length_error,
            self.max_angle_error_deg,
            self.max_sub_edge_distance,
            self.max_edge_distance,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err("association thresholds must be > 0");
        }
        if self.min_sub_edge_matches == 0 || self.min_edge_matches == 0 || self.candidates == 0 {
            return Err("association counts must be >= 1");
        }
        Ok(())
    }
}

/// The segment from an anchor cluster to one neighbour, in the XY plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub anchor: ClusterId,
    pub neighbor: ClusterId,
    pub length: f64,
    /// Unit vector anchor → neighbour.
    pub direction: Vector2<f64>,
    pub neighbor_label: SemanticLabel,
}

/// A sub-edge expressed relative to the edge under matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubEdgeFeature {
    /// Sub-edge length, meters.
    pub d: f64,
    /// Clockwise angle from the matching edge to the sub-edge, `[0, 360)` degrees.
    pub theta: f64,
}

impl SubEdgeFeature {
    pub fn new(d: f64, theta: f64) -> Self {
        Self { d, theta }
    }

    pub fn relative_to(edge: &Edge, sub: &Edge) -> Self {
        Self { d: sub.length, theta: clockwise_angle_deg(edge.direction, sub.direction) }
    }
}

/// A local ↔ global cluster correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchPair {
    pub local: ClusterId,
    pub global: ClusterId,
    pub matched_edges: usize,
}

/// Result of matching one local cluster against one global cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterMatch {
    pub matched: bool,
    pub matched_edges: usize,
}

fn cmp_edges(a: &Edge, b: &Edge) -> Ordering {
    a.length.total_cmp(&b.length).then(a.neighbor.cmp(&b.neighbor))
}

/// Edges from `id` to every other cluster within `search_radius`, sorted by
/// length (ties by neighbour id). Empty for an unknown id.
pub fn neighbor_edges(map: &ClusterMap, id: ClusterId, search_radius: f64) -> Vec<Edge> {
    let Some(anchor) = map.get(id) else { return Vec::new() };
    let origin = anchor.centroid2d();
    let mut edges: Vec<Edge> = map
        .neighbors_of(id, search_radius)
        .into_iter()
        .filter_map(|nid| {
            let n = map.get(nid)?;
            let c = n.centroid2d();
            let v = Vector2::new(c[0] - origin[0], c[1] - origin[1]);
            let length = v.norm();
            // coincident centroids have no direction
            (length > 0.0).then(|| Edge { anchor: id, neighbor: nid, length, direction: v / length, neighbor_label: n.label() })
        })
        .collect();
    edges.sort_by(cmp_edges);
    edges
}

/// Law-of-cosines distance between two sub-edges, using the circular
/// angle difference.
///
/// Evaluated as `(d_a - d_b)² + 4 d_a d_b sin²(Δθ/2)`, which equals
/// `d_a² + d_b² - 2 d_a d_b cos Δθ` without its cancellation for nearly
/// equal sub-edges.
pub fn sub_edge_distance(a: &SubEdgeFeature, b: &SubEdgeFeature) -> f64 {
    let half = 0.5 * circular_difference_deg(a.theta, b.theta).to_radians();
    let dd = a.d - b.d;
    let s = half.sin();
    (dd * dd + 4.0 * a.d * b.d * s * s).max(0.0).sqrt()
}

/// All four sub-edge conditions: equal neighbour labels, length error,
/// angle error and sub-edge distance under their thresholds.
pub fn match_sub_edges(
    a: &SubEdgeFeature,
    b: &SubEdgeFeature,
    label_a: SemanticLabel,
    label_b: SemanticLabel,
    params: &AssociationParams,
) -> bool {
    sub_edge_match_distance(a, b, label_a, label_b, params).is_some()
}

#[inline]
fn sub_edge_match_distance(
    a: &SubEdgeFeature,
    b: &SubEdgeFeature,
    label_a: SemanticLabel,
    label_b: SemanticLabel,
    params: &AssociationParams,
) -> Option<f64> {
    if label_a != label_b || !((a.d - b.d).abs() < params.max_length_error) {
        return None;
    }
    if !(circular_difference_deg(a.theta, b.theta) < params.max_angle_error_deg) {
        return None;
    }
    let d = sub_edge_distance(a, b);
    (d < params.max_sub_edge_distance).then_some(d)
}

/// Indices into `global_edges` of the up to `n` edges whose length is
/// closest to `target`'s, stable with respect to the input order.
pub fn candidate_edge_indices(target: &Edge, global_edges: &[Edge], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..global_edges.len()).collect();
    idx.sort_by(|&a, &b| {
        let ga = (global_edges[a].length - target.length).abs();
        let gb = (global_edges[b].length - target.length).abs();
        ga.total_cmp(&gb).then(a.cmp(&b))
    });
    idx.truncate(n);
    idx
}

/// The up to `n` global edges closest in length to `target`.
pub fn candidate_edges(target: &Edge, global_edges: &[Edge], n: usize) -> Vec<Edge> {
    candidate_edge_indices(target, global_edges, n).into_iter().map(|i| global_edges[i]).collect()
}

/// Greedy one-to-one selection over `(distance, local, global)` triples;
/// returns the matched count and the sum of their distances.
fn greedy_pairing(found: &mut [(f64, usize, usize)], n_local: usize, n_global: usize) -> (usize, f64) {
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_l = alloc::vec![false; n_local];
    let mut used_g = alloc::vec![false; n_global];
    let (mut count, mut sum) = (0usize, 0.0f64);
    for &(d, p, q) in found.iter() {
        if !used_l[p] && !used_g[q] {
            used_l[p] = true;
            used_g[q] = true;
            count += 1;
            sum += d;
        }
    }
    (count, sum)
}

/// Weighted mean distance of matched sub-edge pairs, or `None` when fewer
/// than `min_sub_edge_matches` pairs match.
fn weighted_edge_distance(n_local_edges: usize, matched: usize, sum: f64, params: &AssociationParams) -> Option<f64> {
    if matched < params.min_sub_edge_matches || matched == 0 {
        return None;
    }
    let k = matched as f64;
    let sub_edges = (n_local_edges - 1) as f64;
    Some((sub_edges / k).ln() * (sum / k))
}

/// Distance of the candidate edge pair `(local_edges[local], global_edges[global])`.
///
/// Sub-edges are all other edges of each set. They are paired one-to-one,
/// greedily by increasing sub-edge distance, among pairs satisfying
/// [`match_sub_edges`]. With `k` matched pairs out of `k_l - 1` local
/// sub-edges the distance is `ln((k_l - 1) / k) * mean(distance)`; `None`
/// stands for an unmatched pair.
pub fn edge_pair_distance(
    local_edges: &[Edge],
    local: usize,
    global_edges: &[Edge],
    global: usize,
    params: &AssociationParams,
) -> Option<f64> {
    let el = local_edges.get(local)?;
    let eg = global_edges.get(global)?;
    let mut found = Vec::new();
    for (p, sl) in local_edges.iter().enumerate() {
        if p == local {
            continue;
        }
        let fl = SubEdgeFeature::relative_to(el, sl);
        for (q, sg) in global_edges.iter().enumerate() {
            if q == global {
                continue;
            }
            let fg = SubEdgeFeature::relative_to(eg, sg);
            if let Some(d) = sub_edge_match_distance(&fl, &fg, sl.neighbor_label, sg.neighbor_label, params) {
                found.push((d, p, q));
            }
        }
    }
    let (matched, sum) = greedy_pairing(&mut found, local_edges.len(), global_edges.len());
    weighted_edge_distance(local_edges.len(), matched, sum, params)
}

/// Length-sorted edges of one anchor with their headings cached.
pub(crate) struct EdgeSet {
    edges: Vec<Edge>,
    /// Heading of each edge in degrees, `(-180, 180]`.
    heading: Vec<f64>,
}

impl EdgeSet {
    pub(crate) fn new(edges: Vec<Edge>) -> Self {
        debug_assert!(edges.windows(2).all(|w| cmp_edges(&w[0], &w[1]) != Ordering::Greater));
        let heading = edges.iter().map(|e| e.direction.y.atan2(e.direction.x).to_degrees()).collect();
        Self { edges, heading }
    }

    fn len(&self) -> usize {
        self.edges.len()
    }
}

/// Slack on angle prefilters so rounding in the heading shortcut can never
/// reject a pair the exact test accepts.
const ANGLE_SLACK_DEG: f64 = 1e-6;

/// Same result as [`candidate_edge_indices`] for length-sorted `global_edges`,
/// without sorting the whole set.
fn sorted_candidate_indices(target: &Edge, global_edges: &[Edge], n: usize, out: &mut Vec<usize>) {
    out.clear();
    let m = global_edges.len();
    if n == 0 || m == 0 {
        return;
    }
    let gap = |i: usize| (global_edges[i].length - target.length).abs();
    let split = global_edges.partition_point(|e| e.length < target.length);
    let mut lo = split.saturating_sub(n);
    // equal gaps further left have lower indices and win ties
    while lo > 0 && gap(lo - 1) == gap(lo) {
        lo -= 1;
    }
    let hi = split.saturating_add(n).min(m);
    out.extend(lo..hi);
    out.sort_by(|&a, &b| gap(a).total_cmp(&gap(b)).then(a.cmp(&b)));
    out.truncate(n);
}

/// Reusable buffers for [`match_edge_sets`].
#[derive(Default)]
pub(crate) struct Scratch {
    compat: Vec<(usize, usize, f64)>,
    seen: Vec<bool>,
    arc: Vec<f64>,
    found: Vec<(f64, usize, usize)>,
    candidates: Vec<usize>,
}

/// Fills `out` with the pairs `(p, q)` of local/global edges that could
/// ever match as sub-edges: equal neighbour labels and length difference
/// under `max_length_error`. Any pair failing this fails
/// [`match_sub_edges`] for every edge pair. Each pair carries the rotation
/// `heading_q - heading_p` it implies.
///
/// Returns how many distinct local and global edges take part.
fn compatible_pairs(
    local: &EdgeSet,
    global: &EdgeSet,
    params: &AssociationParams,
    out: &mut Vec<(usize, usize, f64)>,
    seen: &mut Vec<bool>,
) -> (usize, usize) {
    out.clear();
    seen.clear();
    seen.resize(global.len(), false);
    let (mut locals, mut globals) = (0, 0);
    for (p, el) in local.edges.iter().enumerate() {
        let before = out.len();
        let lo = global.edges.partition_point(|e| e.length <= el.length - params.max_length_error);
        for (q, eg) in global.edges.iter().enumerate().skip(lo) {
            if eg.length >= el.length + params.max_length_error {
                break;
            }
            if eg.neighbor_label == el.neighbor_label && (el.length - eg.length).abs() < params.max_length_error {
                out.push((p, q, global.heading[q] - local.heading[p]));
                if !seen[q] {
                    seen[q] = true;
                    globals += 1;
                }
            }
        }
        if out.len() > before {
            locals += 1;
        }
    }
    (locals, globals)
}

/// Most rotations from `rotations` (degrees) that fit in one arc of
/// `width` degrees.
fn densest_arc(rotations: impl Iterator<Item = f64>, width: f64, buf: &mut Vec<f64>) -> usize {
    buf.clear();
    buf.extend(rotations.map(crate::geometry::wrap_degrees));
    buf.sort_by(f64::total_cmp);
    let n = buf.len();
    for i in 0..n {
        let v = buf[i] + 360.0;
        buf.push(v);
    }
    let (mut best, mut j) = (0, 0);
    for i in 0..n {
        j = j.max(i);
        while j < i + n && buf[j] - buf[i] <= width {
            j += 1;
        }
        best = best.max(j - i);
    }
    best
}

/// Edge-level matching of two clusters given their edge sets; the label
/// check is the caller's.
///
/// Equivalent to evaluating [`edge_pair_distance`] on every candidate, but
/// only visits length-compatible sub-edge pairs whose implied rotation
/// agrees with the candidate edge pair. Sub-edges matched for one edge
/// pair all imply rotations within the angle tolerance of that pair's, so
/// when no arc of twice the tolerance holds `min_sub_edge_matches` of them
/// nothing can match and the count is zero.
fn match_edge_sets(local: &EdgeSet, global: &EdgeSet, params: &AssociationParams, scratch: &mut Scratch) -> usize {
    let needed = params.min_sub_edge_matches;
    if local.len() < params.min_edge_matches || local.len() <= needed || global.len() <= needed {
        return 0;
    }
    let Scratch { compat, seen, arc, found, candidates } = scratch;
    let (locals, globals) = compatible_pairs(local, global, params, compat, seen);
    if locals < needed || globals < needed {
        return 0;
    }
    let tolerance = params.max_angle_error_deg + ANGLE_SLACK_DEG;
    if densest_arc(compat.iter().map(|c| c.2), 2.0 * tolerance, arc) < needed {
        return 0;
    }

    let mut matched_edges = 0;
    for (i, el) in local.edges.iter().enumerate() {
        let mut best = f64::INFINITY;
        sorted_candidate_indices(el, &global.edges, params.candidates, candidates);
        for &j in candidates.iter() {
            let eg = &global.edges[j];
            let rotation = global.heading[j] - local.heading[i];
            found.clear();
            for &(p, q, r) in compat.iter() {
                if p == i || q == j || !(crate::geometry::circular_difference_deg(r, rotation) < tolerance) {
                    continue;
                }
                let (sl, sg) = (&local.edges[p], &global.edges[q]);
                let fl = SubEdgeFeature::relative_to(el, sl);
                let fg = SubEdgeFeature::relative_to(eg, sg);
                if let Some(d) = sub_edge_match_distance(&fl, &fg, sl.neighbor_label, sg.neighbor_label, params) {
                    found.push((d, p, q));
                }
            }
            if found.len() < needed {
                continue;
            }
            let (matched, sum) = greedy_pairing(found, local.len(), global.len());
            if let Some(d) = weighted_edge_distance(local.len(), matched, sum, params) {
                if d < best {
                    best = d;
                }
            }
        }
        if best < params.max_edge_distance {
            matched_edges += 1;
        }
    }
    matched_edges
}

/// Decides whether local cluster `local` and global cluster `global` are
/// the same object.
///
/// Differing labels fail immediately. Otherwise each local edge is compared
/// with its closest-length candidate global edges; it matches if the best
/// candidate distance is below `max_edge_distance`, and the clusters match
/// when at least `min_edge_matches` edges do.
pub fn match_clusters(
    local: ClusterId,
    global: ClusterId,
    local_map: &ClusterMap,
    global_map: &ClusterMap,
    params: &AssociationParams,
) -> ClusterMatch {
    let (Some(cl), Some(cg)) = (local_map.get(local), global_map.get(global)) else {
        return ClusterMatch { matched: false, matched_edges: 0 };
    };
    if cl.label() != cg.label() {
        return ClusterMatch { matched: false, matched_edges: 0 };
    }
    let el = EdgeSet::new(neighbor_edges(local_map, local, params.search_radius));
    let eg = EdgeSet::new(neighbor_edges(global_map, global, params.search_radius));
    let k = match_edge_sets(&el, &eg, params, &mut Scratch::default());
    ClusterMatch { matched: k >= params.min_edge_matches, matched_edges: k }
}

/// Edge sets of every cluster of a global map, computed once and shared
/// by many association calls.
pub struct AssociationIndex {
    search_radius: f64,
    sets: Vec<(ClusterId, SemanticLabel, EdgeSet)>,
}

impl AssociationIndex {
    pub fn new(global_map: &ClusterMap, search_radius: f64) -> Self {
        let sets = global_map
            .iter()
            .map(|c| (c.id(), c.label(), EdgeSet::new(neighbor_edges(global_map, c.id(), search_radius))))
            .collect();
        Self { search_radius, sets }
    }

    pub fn search_radius(&self) -> f64 {
        self.search_radius
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Associates every local cluster with at most one global cluster.
///
/// Among the global clusters matching a local cluster the one with most
/// matched edges wins (ties: lowest global id). If several local clusters
/// pick the same global cluster, the one with most matched edges keeps it
/// (ties: lowest local id). Output is sorted by local id.
pub fn associate_maps(local_map: &ClusterMap, global_map: &ClusterMap, params: &AssociationParams) -> Vec<MatchPair> {
    if local_map.is_empty() || global_map.is_empty() {
        return Vec::new();
    }
    associate_with_index(local_map, &AssociationIndex::new(global_map, params.search_radius), params)
}

/// [`associate_maps`] against a prepared global index. An index built for
/// a different search radius yields no pairs.
pub fn associate_with_index(local_map: &ClusterMap, index: &AssociationIndex, params: &AssociationParams) -> Vec<MatchPair> {
    if index.search_radius != params.search_radius {
        return Vec::new();
    }
    let mut scratch = Scratch::default();
    let mut pairs: Vec<MatchPair> = Vec::new();
    for cl in local_map.iter() {
        let el = EdgeSet::new(neighbor_edges(local_map, cl.id(), params.search_radius));
        if el.len() < params.min_edge_matches {
            continue;
        }
        let mut best: Option<MatchPair> = None;
        for (gid, glabel, eg) in &index.sets {
            if *glabel != cl.label() {
                continue;
            }
            let k = match_edge_sets(&el, eg, params, &mut scratch);
            if k >= params.min_edge_matches && best.is_none_or(|b| k > b.matched_edges) {
                best = Some(MatchPair { local: cl.id(), global: *gid, matched_edges: k });
            }
        }
        pairs.extend(best);
    }
    resolve_global_conflicts(pairs)
}

/// Keeps one pair per global id (most matched edges, then lowest local id),
/// sorted by local id.
pub(crate) fn resolve_global_conflicts(mut pairs: Vec<MatchPair>) -> Vec<MatchPair> {
    pairs.sort_by(|a, b| a.global.cmp(&b.global).then(b.matched_edges.cmp(&a.matched_edges)).then(a.local.cmp(&b.local)));
    pairs.dedup_by_key(|p| p.global);
    pairs.sort_by_key(|p| p.local);
    pairs
}
