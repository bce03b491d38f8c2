//! The online clusterer: one vector in, one cluster id out.
//!
//! Each vector goes to the subcluster with the most similar centroid when the
//! similarity reaches `T_s`. Otherwise it starts a new subcluster, which is
//! linked to that nearest subcluster when the similarity reaches the
//! size-dependent threshold `s̃(k)`, and becomes a new cluster when it does not.
//!
//! A vector that lands in an existing subcluster moves its centroid, so the
//! update runs in up to three passes:
//!
//! 1. merge the node with any neighbour whose centroid is now within `T_s`,
//!    repeating on the merged node until nothing qualifies;
//! 2. drop every edge at the resulting node whose centroid similarity fell
//!    below `s̃(k_i, k_j)`;
//! 3. for every dropped edge that split its cluster, link the best qualifying
//!    pair across the cut inside the former cluster, if one exists.
//!
//! A rejoin edge can itself be within `T_s`; such a pair is merged and the
//! passes repeat. Every extra round removes a node, so the loop terminates.

use crate::graph::{
    ClusterGraph, ClusterId, ComponentChange, GraphError, GraphSnapshot, SubclusterId,
};
use crate::hypersphere::{GeometryError, UnitVector};
use crate::thresholds::{ConfigErrors, LinksConfig, Thresholds};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("dimension mismatch: clusterer has {expected}, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// What happened to the vector passed to [`LinksClusterer::add_vector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    JoinedSubcluster,
    NewSubclusterLinked,
    NewSubclusterNewCluster,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::JoinedSubcluster => "joined_subcluster",
            Action::NewSubclusterLinked => "new_subcluster_linked",
            Action::NewSubclusterNewCluster => "new_subcluster_new_cluster",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddResult {
    pub cluster_id: ClusterId,
    /// The subcluster holding the vector once all updates are done.
    pub subcluster_id: SubclusterId,
    pub action: Action,
    pub merges_performed: usize,
    pub edges_removed: usize,
    pub rejoins: usize,
    /// `(absorbed, survivor)` for each merge, in order.
    pub merged: Vec<(SubclusterId, SubclusterId)>,
}

/// Finds the subcluster whose centroid is most similar to a query vector.
pub trait NearestCentroid {
    /// Highest `x · μ̂` over all subclusters, ties to the smallest id.
    fn nearest(&self, graph: &ClusterGraph, x: &UnitVector) -> Option<(SubclusterId, f64)>;
}

/// Exhaustive scan over every centroid.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearScan;

impl NearestCentroid for LinearScan {
    fn nearest(&self, graph: &ClusterGraph, x: &UnitVector) -> Option<(SubclusterId, f64)> {
        let mut best: Option<(SubclusterId, f64)> = None;
        for node in graph.subclusters() {
            let sim = x.dot_unchecked(node.centroid());
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((node.id(), sim));
            }
        }
        best
    }
}

#[derive(Debug, Default)]
struct Delta {
    merged: Vec<(SubclusterId, SubclusterId)>,
    removed: usize,
    rejoins: usize,
}

#[derive(Debug, Clone)]
pub struct LinksClusterer<S = LinearScan> {
    config: LinksConfig,
    thresholds: Thresholds,
    graph: ClusterGraph,
    ingested: u64,
    seed: u64,
    search: S,
}

impl LinksClusterer<LinearScan> {
    pub fn new(config: LinksConfig) -> Result<Self, ClusterError> {
        Self::with_search(config, LinearScan)
    }

    /// Wraps an existing graph, e.g. one built by hand for a test scenario.
    pub fn from_graph(config: LinksConfig, graph: ClusterGraph) -> Result<Self, ClusterError> {
        let thresholds = Thresholds::new(&config)?;
        if graph.dimension() != config.dimension {
            return Err(ClusterError::DimensionMismatch {
                expected: config.dimension,
                found: graph.dimension(),
            });
        }
        graph.check_invariants()?;
        Ok(LinksClusterer {
            ingested: graph.total_vectors(),
            config,
            thresholds,
            graph,
            seed: 0,
            search: LinearScan,
        })
    }
}

impl<S: NearestCentroid> LinksClusterer<S> {
    pub fn with_search(config: LinksConfig, search: S) -> Result<Self, ClusterError> {
        let thresholds = Thresholds::new(&config)?;
        let graph = ClusterGraph::new(config.dimension)?;
        Ok(LinksClusterer {
            config,
            thresholds,
            graph,
            ingested: 0,
            seed: 0,
            search,
        })
    }

    /// Seed reserved for randomized tie-breaking; the default procedure never draws from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &LinksConfig {
        &self.config
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn graph(&self) -> &ClusterGraph {
        &self.graph
    }

    pub fn ingested_count(&self) -> u64 {
        self.ingested
    }

    /// Applies the ingest policy to a raw vector, then clusters it.
    pub fn add_raw(&mut self, components: &[f64]) -> Result<AddResult, ClusterError> {
        if components.len() != self.config.dimension {
            return Err(ClusterError::DimensionMismatch {
                expected: self.config.dimension,
                found: components.len(),
            });
        }
        let x = if self.config.strict_unit_norm {
            UnitVector::strict(components)?
        } else {
            UnitVector::new(components)?
        };
        self.add_vector(&x)
    }

    pub fn add_vector(&mut self, x: &UnitVector) -> Result<AddResult, ClusterError> {
        if x.dimension() != self.config.dimension {
            return Err(ClusterError::DimensionMismatch {
                expected: self.config.dimension,
                found: x.dimension(),
            });
        }
        let mut delta = Delta::default();
        let (home, action) = match self.search.nearest(&self.graph, x) {
            None => (
                self.graph.create_subcluster(x)?,
                Action::NewSubclusterNewCluster,
            ),
            Some((nearest, sim)) if sim >= self.thresholds.subcluster() => {
                self.graph.add_vector(nearest, x)?;
                let home = self.update_after_add(nearest, &mut delta)?;
                (home, Action::JoinedSubcluster)
            }
            Some((nearest, sim)) => {
                let k = self.graph.subcluster(nearest)?.count();
                if sim >= self.thresholds.link(k) {
                    (
                        self.graph.create_linked_subcluster(x, nearest)?,
                        Action::NewSubclusterLinked,
                    )
                } else {
                    (
                        self.graph.create_subcluster(x)?,
                        Action::NewSubclusterNewCluster,
                    )
                }
            }
        };
        self.ingested += 1;
        Ok(AddResult {
            cluster_id: self.graph.component_of(home)?,
            subcluster_id: home,
            action,
            merges_performed: delta.merged.len(),
            edges_removed: delta.removed,
            rejoins: delta.rejoins,
            merged: delta.merged,
        })
    }

    fn similarity(&self, i: SubclusterId, j: SubclusterId) -> f64 {
        let a = self.graph.subcluster(i).expect("live node").centroid();
        let b = self.graph.subcluster(j).expect("live node").centroid();
        a.dot_unchecked(b)
    }

    fn pair_threshold(&self, i: SubclusterId, j: SubclusterId) -> f64 {
        let ki = self.graph.subcluster(i).expect("live node").count();
        let kj = self.graph.subcluster(j).expect("live node").count();
        self.thresholds.pair(ki, kj)
    }

    /// Merge, revalidate and rejoin around `start`, which just received a
    /// vector. Returns the node now holding that vector.
    fn update_after_add(
        &mut self,
        start: SubclusterId,
        delta: &mut Delta,
    ) -> Result<SubclusterId, ClusterError> {
        let mut home = start;
        let mut seeds = vec![start];
        while !seeds.is_empty() {
            let mut affected = Vec::new();
            for seed in std::mem::take(&mut seeds) {
                if !self.graph.contains(seed) {
                    continue;
                }
                let node = self.merge_to_fixpoint(seed, &mut home, delta)?;
                if !affected.contains(&node) {
                    affected.push(node);
                }
            }
            affected.retain(|&n| self.graph.contains(n));

            let removed = self.drop_invalid_edges(&affected, delta)?;
            for (a, b, former) in removed {
                if let Some((u, v, sim)) = self.rejoin(a, b, &former)? {
                    delta.rejoins += 1;
                    if sim >= self.thresholds.subcluster() {
                        seeds.push(u);
                        seeds.push(v);
                    }
                }
            }
        }
        Ok(home)
    }

    fn merge_to_fixpoint(
        &mut self,
        mut node: SubclusterId,
        home: &mut SubclusterId,
        delta: &mut Delta,
    ) -> Result<SubclusterId, ClusterError> {
        let ts = self.thresholds.subcluster();
        loop {
            let mut best: Option<(SubclusterId, f64)> = None;
            for &n in self.graph.subcluster(node)?.neighbors() {
                let sim = self.similarity(node, n);
                if sim >= ts && best.is_none_or(|(_, b)| sim > b) {
                    best = Some((n, sim));
                }
            }
            let Some((partner, _)) = best else {
                return Ok(node);
            };
            let out = self.graph.merge_subclusters(node, partner)?;
            delta.merged.push((out.absorbed, out.survivor));
            if *home == out.absorbed {
                *home = out.survivor;
            }
            node = out.survivor;
        }
    }

    /// Removes every invalid edge incident to `affected`. Returns the removed
    /// pairs that split their cluster, each with the member set of the
    /// cluster as it was before this pass.
    #[allow(clippy::type_complexity)]
    fn drop_invalid_edges(
        &mut self,
        affected: &[SubclusterId],
        delta: &mut Delta,
    ) -> Result<Vec<(SubclusterId, SubclusterId, BTreeSet<SubclusterId>)>, ClusterError> {
        let mut splits = Vec::new();
        for &node in affected {
            let neighbors: Vec<SubclusterId> = self
                .graph
                .subcluster(node)?
                .neighbors()
                .iter()
                .copied()
                .collect();
            let mut former: Option<BTreeSet<SubclusterId>> = None;
            for n in neighbors {
                if self.similarity(node, n) >= self.pair_threshold(node, n) {
                    continue;
                }
                if former.is_none() {
                    let cluster = self.graph.component_of(node)?;
                    former = self.graph.members(cluster).cloned();
                }
                let change = self.graph.remove_edge(node, n)?;
                delta.removed += 1;
                if let ComponentChange::Split { .. } = change {
                    splits.push((node, n, former.clone().unwrap_or_default()));
                }
            }
        }
        Ok(splits)
    }

    /// Links the most similar qualifying pair `(endpoint, partner)` with
    /// endpoint in `{a, b}` and partner drawn from `former`, outside the
    /// endpoint's current cluster.
    fn rejoin(
        &mut self,
        a: SubclusterId,
        b: SubclusterId,
        former: &BTreeSet<SubclusterId>,
    ) -> Result<Option<(SubclusterId, SubclusterId, f64)>, ClusterError> {
        if self.graph.component_of(a)? == self.graph.component_of(b)? {
            return Ok(None);
        }
        let mut best: Option<(SubclusterId, SubclusterId, f64)> = None;
        for endpoint in [a, b] {
            let home = self.graph.component_of(endpoint)?;
            for &p in former {
                if !self.graph.contains(p) || self.graph.component_of(p)? == home {
                    continue;
                }
                let sim = self.similarity(endpoint, p);
                if sim >= self.pair_threshold(endpoint, p) && best.is_none_or(|(_, _, s)| sim > s) {
                    best = Some((endpoint, p, sim));
                }
            }
        }
        if let Some((u, v, _)) = best {
            self.graph.add_edge(u, v)?;
        }
        Ok(best)
    }

    pub fn stats(&self) -> ClusterStats {
        let mut histogram = BTreeMap::new();
        for cluster in self.graph.components().keys() {
            let size = self.graph.cluster_size(*cluster).unwrap_or(0);
            *histogram.entry(size).or_insert(0usize) += 1;
        }
        ClusterStats {
            clusters: self.graph.cluster_count(),
            subclusters: self.graph.subcluster_count(),
            edges: self.graph.edge_count(),
            vectors: self.ingested,
            size_histogram: histogram,
        }
    }

    /// Every edge satisfies the pair threshold and sits below `T_s`, and the
    /// graph agrees with a from-scratch recomputation.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.graph.check_invariants().map_err(|e| e.to_string())?;
        if self.graph.total_vectors() != self.ingested {
            return Err(format!(
                "graph holds {} vectors, {} ingested",
                self.graph.total_vectors(),
                self.ingested
            ));
        }
        let ts = self.thresholds.subcluster();
        for (i, j) in self.graph.edges() {
            let sim = self.similarity(i, j);
            let thr = self.pair_threshold(i, j);
            if sim < thr {
                return Err(format!(
                    "edge {i}-{j}: similarity {sim} below threshold {thr}"
                ));
            }
            if sim >= ts {
                return Err(format!("edge {i}-{j}: similarity {sim} reaches T_s {ts}"));
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            dimension: self.config.dimension,
            config: self.config.clone(),
            seed: self.seed,
            ingested_count: self.ingested,
            graph: self.graph.to_snapshot(),
        }
    }

    pub fn snapshot_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterStats {
    pub clusters: usize,
    pub subclusters: usize,
    pub edges: usize,
    pub vectors: u64,
    /// Cluster size (vectors) → number of clusters of that size.
    pub size_histogram: BTreeMap<u64, usize>,
}

impl ClusterStats {
    /// Σ size × frequency over the histogram; equals `vectors`.
    pub fn histogram_total(&self) -> u64 {
        self.size_histogram
            .iter()
            .map(|(size, n)| size * *n as u64)
            .sum()
    }
}

pub const SNAPSHOT_FORMAT: &str = "links-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Persisted clusterer state. See `docs/snapshot-format.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    pub dimension: usize,
    pub config: LinksConfig,
    pub seed: u64,
    pub ingested_count: u64,
    pub graph: GraphSnapshot,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot payload is corrupted: {0}")]
    Corrupted(String),
    #[error("not a links snapshot (format field {0:?})")]
    UnknownFormat(Option<String>),
    #[error("unsupported snapshot version {found} (supported: {SNAPSHOT_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("snapshot dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("snapshot state is inconsistent: {0}")]
    Inconsistent(String),
}

impl Snapshot {
    pub fn from_json(text: &str) -> Result<Self, SnapshotError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SnapshotError::Corrupted(e.to_string()))?;
        let format = value.get("format").and_then(|f| f.as_str());
        if format != Some(SNAPSHOT_FORMAT) {
            return Err(SnapshotError::UnknownFormat(format.map(str::to_owned)));
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == SNAPSHOT_VERSION as u64 => {}
            Some(found) => return Err(SnapshotError::UnsupportedVersion { found }),
            None => return Err(SnapshotError::Corrupted("missing version".into())),
        }
        serde_json::from_value(value).map_err(|e| SnapshotError::Corrupted(e.to_string()))
    }

    pub fn restore(self) -> Result<LinksClusterer, SnapshotError> {
        if self.config.dimension != self.dimension {
            return Err(SnapshotError::DimensionMismatch {
                expected: self.dimension,
                found: self.config.dimension,
            });
        }
        let thresholds = Thresholds::new(&self.config)
            .map_err(|e| SnapshotError::Inconsistent(e.to_string()))?;
        let graph =
            ClusterGraph::from_snapshot(self.dimension, self.graph).map_err(|e| match e {
                GraphError::DimensionMismatch { expected, found } => {
                    SnapshotError::DimensionMismatch { expected, found }
                }
                other => SnapshotError::Inconsistent(other.to_string()),
            })?;
        if graph.total_vectors() != self.ingested_count {
            return Err(SnapshotError::Inconsistent(format!(
                "ingested_count {} but graph holds {} vectors",
                self.ingested_count,
                graph.total_vectors()
            )));
        }
        Ok(LinksClusterer {
            config: self.config,
            thresholds,
            graph,
            ingested: self.ingested_count,
            seed: self.seed,
            search: LinearScan,
        })
    }
}

/// Parses and restores a snapshot document.
pub fn restore(text: &str) -> Result<LinksClusterer, SnapshotError> {
    Snapshot::from_json(text)?.restore()
}

/// As [`restore`], additionally requiring the snapshot to have `dimension`.
pub fn restore_with_dimension(
    text: &str,
    dimension: usize,
) -> Result<LinksClusterer, SnapshotError> {
    let snap = Snapshot::from_json(text)?;
    if snap.dimension != dimension {
        return Err(SnapshotError::DimensionMismatch {
            expected: dimension,
            found: snap.dimension,
        });
    }
    snap.restore()
}
