//! Id-addressable cluster collections with a planar spatial index.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::cluster::{Cluster, ClusterId};
use crate::geometry::dist2d;
use crate::kdtree::KdTree;

/// Default radius for neighbour queries, meters.
pub const DEFAULT_SEARCH_RADIUS: f64 = 50.0;

/// A set of semantic clusters indexed on their 2D centroids.
///
/// The kd-tree is a snapshot. Clusters inserted, merged or removed since the
/// last rebuild are tracked in `stale` and answered by a linear scan, so
/// queries are always exact; the tree is rebuilt once the stale set grows
/// past a fraction of the map or on [`ClusterMap::refresh_index`].
#[derive(Debug, Clone, Default)]
pub struct ClusterMap {
    clusters: BTreeMap<ClusterId, Cluster>,
    next_id: u64,
    index: KdTree<2>,
    stale: BTreeSet<ClusterId>,
}

impl PartialEq for ClusterMap {
    fn eq(&self, other: &Self) -> bool {
        self.clusters == other.clusters && self.next_id == other.next_id
    }
}

impl ClusterMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a map from clusters, assigning fresh ids in iteration order.
    pub fn from_clusters(clusters: impl IntoIterator<Item = Cluster>) -> Self {
        let mut map = Self::new();
        map.insert_batch(clusters);
        map
    }

    /// Restores a map whose clusters keep their own ids. Fails on a
    /// duplicate id or if `next_id` does not exceed every id.
    pub fn from_parts(clusters: Vec<Cluster>, next_id: u64) -> Result<Self, ClusterId> {
        let mut map = Self { next_id, ..Self::default() };
        for c in clusters {
            let id = c.id();
            if id.0 >= next_id || map.clusters.insert(id, c).is_some() {
                return Err(id);
            }
        }
        map.refresh_index();
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Id the next inserted cluster will receive.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn get(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.get(&id)
    }

    pub fn contains(&self, id: ClusterId) -> bool {
        self.clusters.contains_key(&id)
    }

    /// Clusters in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = ClusterId> + '_ {
        self.clusters.keys().copied()
    }

    /// Inserts `cluster` under a freshly assigned id, which is returned.
    pub fn insert(&mut self, cluster: Cluster) -> ClusterId {
        let id = self.insert_deferred(cluster);
        self.maybe_rebuild();
        id
    }

    /// Inserts several clusters and rebuilds the index at most once.
    pub fn insert_batch(&mut self, clusters: impl IntoIterator<Item = Cluster>) -> Vec<ClusterId> {
        let ids = clusters.into_iter().map(|c| self.insert_deferred(c)).collect();
        self.maybe_rebuild();
        ids
    }

    fn insert_deferred(&mut self, mut cluster: Cluster) -> ClusterId {
        let id = ClusterId(self.next_id);
        self.next_id += 1;
        cluster.set_id(id);
        self.clusters.insert(id, cluster);
        self.stale.insert(id);
        id
    }

    pub fn remove(&mut self, id: ClusterId) -> Option<Cluster> {
        let removed = self.clusters.remove(&id)?;
        self.stale.insert(id);
        self.maybe_rebuild();
        Some(removed)
    }

    /// Merges `incoming` into an existing cluster, which keeps its id and
    /// label. Returns false if `id` is not in the map.
    pub fn merge_into(&mut self, id: ClusterId, incoming: &Cluster) -> bool {
        match self.clusters.get_mut(&id) {
            Some(c) => {
                c.absorb(incoming);
                self.stale.insert(id);
                true
            }
            None => false,
        }
    }

    /// Rebuilds the kd-tree from the current centroids.
    pub fn refresh_index(&mut self) {
        self.index = KdTree::build(self.clusters.values().map(|c| (c.centroid2d(), c.id().0)));
        self.stale.clear();
    }

    fn maybe_rebuild(&mut self) {
        if self.stale.len() > 32.max(self.clusters.len() / 8) {
            self.refresh_index();
        }
    }

    /// Ids of clusters whose 2D centroid lies within `radius` (inclusive) of
    /// `query`, ascending.
    pub fn radius_search(&self, query: [f64; 2], radius: f64) -> Vec<ClusterId> {
        let mut out: Vec<ClusterId> = Vec::new();
        if !(radius >= 0.0) {
            return out;
        }
        self.index.for_each_within(&query, radius, |key, _| {
            let id = ClusterId(key);
            if !self.stale.contains(&id) {
                out.push(id);
            }
        });
        for id in &self.stale {
            if let Some(c) = self.clusters.get(id) {
                let [x, y] = c.centroid2d();
                let (dx, dy) = (x - query[0], y - query[1]);
                // same squared comparison as the tree
                if dx * dx + dy * dy <= radius * radius {
                    out.push(*id);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Neighbours of a map cluster within `radius`, excluding the cluster
    /// itself. Empty if `id` is unknown.
    pub fn neighbors_of(&self, id: ClusterId, radius: f64) -> Vec<ClusterId> {
        match self.clusters.get(&id) {
            Some(c) => {
                let mut ids = self.radius_search(c.centroid2d(), radius);
                ids.retain(|&n| n != id);
                ids
            }
            None => Vec::new(),
        }
    }

    /// Cluster with the closest 2D centroid as `(id, distance)`; ties go to
    /// the lowest id.
    pub fn nearest_cluster(&self, query: [f64; 2]) -> Option<(ClusterId, f64)> {
        self.nearest_matching(query, |_| true)
    }

    /// Like [`ClusterMap::nearest_cluster`] restricted to clusters passing `keep`.
    pub fn nearest_matching(&self, query: [f64; 2], keep: impl Fn(&Cluster) -> bool) -> Option<(ClusterId, f64)> {
        let mut best: Option<(ClusterId, f64)> = None;
        let mut consider = |id: ClusterId, d: f64| match best {
            Some((bid, bd)) if d > bd || (d == bd && id > bid) => {}
            _ => best = Some((id, d)),
        };
        // the snapshot answers the query unless its winner is stale or
        // filtered out; then fall back to a scan
        if let Some((key, _)) = self.index.nearest(&query) {
            let id = ClusterId(key);
            if !self.stale.contains(&id) {
                let c = &self.clusters[&id];
                if keep(c) {
                    consider(id, dist2d(c.centroid2d(), query));
                    for sid in &self.stale {
                        if let Some(c) = self.clusters.get(sid) {
                            if keep(c) {
                                consider(*sid, dist2d(c.centroid2d(), query));
                            }
                        }
                    }
                    return best;
                }
            }
        }
        for c in self.clusters.values() {
            if keep(c) {
                consider(c.id(), dist2d(c.centroid2d(), query));
            }
        }
        best
    }
}
