//! Two-level store: subclusters are graph nodes, clusters are connected components.
//!
//! Each component carries an external [`ClusterId`] drawn from a monotone
//! counter. When two components join, the one holding more vectors keeps its
//! id (ties go to the smaller id). When an edge removal splits a component,
//! the side holding more vectors keeps the id and the other side gets a fresh
//! one (ties go to the side containing the smallest subcluster id).
//!
//! Component membership is kept as explicit member sets. Joins relabel the
//! retiring side in place; removals run a breadth-first search over the
//! affected component only.

use crate::hypersphere::{centroid, GeometryError, UnitVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubclusterId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u64);

impl fmt::Display for SubclusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown subcluster {0}")]
    UnknownSubcluster(SubclusterId),
    #[error("self-edge on subcluster {0}")]
    SelfEdge(SubclusterId),
    #[error("no edge between subclusters {0} and {1}")]
    MissingEdge(SubclusterId, SubclusterId),
    #[error("dimension mismatch: graph has {expected}, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("inconsistent graph state: {0}")]
    Corrupt(String),
}

/// An indivisible collection of vectors, stored as a running sum and count.
#[derive(Debug, Clone, PartialEq)]
pub struct Subcluster {
    id: SubclusterId,
    sum: Vec<f64>,
    count: u64,
    centroid: UnitVector,
    neighbors: BTreeSet<SubclusterId>,
    cluster: ClusterId,
}

impl Subcluster {
    pub fn id(&self) -> SubclusterId {
        self.id
    }

    pub fn vector_sum(&self) -> &[f64] {
        &self.sum
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn centroid(&self) -> &UnitVector {
        &self.centroid
    }

    pub fn neighbors(&self) -> &BTreeSet<SubclusterId> {
        &self.neighbors
    }

    pub fn cluster(&self) -> ClusterId {
        self.cluster
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    members: BTreeSet<SubclusterId>,
    vectors: u64,
}

/// How a graph mutation changed the component structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentChange {
    Unchanged,
    /// Two components became one; `retired` will never be used again.
    Joined {
        kept: ClusterId,
        retired: ClusterId,
    },
    /// One component became two; `minted` is the fresh id of the smaller side.
    Split {
        kept: ClusterId,
        minted: ClusterId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeOutcome {
    pub survivor: SubclusterId,
    pub absorbed: SubclusterId,
    pub component: ComponentChange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGraph {
    dimension: usize,
    nodes: BTreeMap<SubclusterId, Subcluster>,
    components: BTreeMap<ClusterId, Component>,
    next_subcluster_id: u64,
    next_cluster_id: u64,
}

impl ClusterGraph {
    pub fn new(dimension: usize) -> Result<Self, GraphError> {
        if dimension < 2 {
            return Err(GeometryError::InvalidDimension {
                found: dimension,
                min: 2,
            }
            .into());
        }
        Ok(ClusterGraph {
            dimension,
            nodes: BTreeMap::new(),
            components: BTreeMap::new(),
            next_subcluster_id: 0,
            next_cluster_id: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn subcluster_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.components.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes
            .values()
            .map(|n| n.neighbors.len())
            .sum::<usize>()
            / 2
    }

    pub fn total_vectors(&self) -> u64 {
        self.components.values().map(|c| c.vectors).sum()
    }

    pub fn next_subcluster_id(&self) -> SubclusterId {
        SubclusterId(self.next_subcluster_id)
    }

    pub fn next_cluster_id(&self) -> ClusterId {
        ClusterId(self.next_cluster_id)
    }

    pub fn contains(&self, id: SubclusterId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn subcluster(&self, id: SubclusterId) -> Result<&Subcluster, GraphError> {
        self.nodes.get(&id).ok_or(GraphError::UnknownSubcluster(id))
    }

    /// Subclusters in increasing id order.
    pub fn subclusters(&self) -> impl Iterator<Item = &Subcluster> {
        self.nodes.values()
    }

    /// Every edge once, as `(smaller id, larger id)`, in increasing order.
    pub fn edges(&self) -> impl Iterator<Item = (SubclusterId, SubclusterId)> + '_ {
        self.nodes.values().flat_map(|n| {
            n.neighbors
                .range((std::ops::Bound::Excluded(n.id), std::ops::Bound::Unbounded))
                .map(move |&m| (n.id, m))
        })
    }

    pub fn has_edge(&self, i: SubclusterId, j: SubclusterId) -> bool {
        self.nodes.get(&i).is_some_and(|n| n.neighbors.contains(&j))
    }

    pub fn component_of(&self, id: SubclusterId) -> Result<ClusterId, GraphError> {
        self.subcluster(id).map(|n| n.cluster)
    }

    /// Members of one cluster, in increasing id order.
    pub fn members(&self, cluster: ClusterId) -> Option<&BTreeSet<SubclusterId>> {
        self.components.get(&cluster).map(|c| &c.members)
    }

    /// Number of vectors held by one cluster.
    pub fn cluster_size(&self, cluster: ClusterId) -> Option<u64> {
        self.components.get(&cluster).map(|c| c.vectors)
    }

    /// The current partition of subclusters into clusters.
    pub fn components(&self) -> BTreeMap<ClusterId, Vec<SubclusterId>> {
        self.components
            .iter()
            .map(|(id, c)| (*id, c.members.iter().copied().collect()))
            .collect()
    }

    fn check_dimension(&self, x: &UnitVector) -> Result<(), GraphError> {
        if x.dimension() != self.dimension {
            return Err(GraphError::DimensionMismatch {
                expected: self.dimension,
                found: x.dimension(),
            });
        }
        Ok(())
    }

    fn mint_cluster(&mut self) -> ClusterId {
        let id = ClusterId(self.next_cluster_id);
        self.next_cluster_id += 1;
        id
    }

    fn insert_node(&mut self, x: &UnitVector, cluster: ClusterId) -> SubclusterId {
        let id = SubclusterId(self.next_subcluster_id);
        self.next_subcluster_id += 1;
        self.nodes.insert(
            id,
            Subcluster {
                id,
                sum: x.as_slice().to_vec(),
                count: 1,
                // Same path as every later recomputation, so restores agree bit for bit.
                centroid: centroid(x.as_slice(), 1).unwrap_or_else(|_| x.clone()),
                neighbors: BTreeSet::new(),
                cluster,
            },
        );
        let comp = self.components.entry(cluster).or_insert_with(|| Component {
            members: BTreeSet::new(),
            vectors: 0,
        });
        comp.members.insert(id);
        comp.vectors += 1;
        id
    }

    /// New singleton subcluster forming its own cluster.
    pub fn create_subcluster(&mut self, x: &UnitVector) -> Result<SubclusterId, GraphError> {
        self.check_dimension(x)?;
        let cluster = self.mint_cluster();
        Ok(self.insert_node(x, cluster))
    }

    /// New singleton subcluster joined by an edge to `partner`, entering the
    /// partner's cluster without minting an id.
    pub fn create_linked_subcluster(
        &mut self,
        x: &UnitVector,
        partner: SubclusterId,
    ) -> Result<SubclusterId, GraphError> {
        self.check_dimension(x)?;
        let cluster = self.component_of(partner)?;
        let id = self.insert_node(x, cluster);
        self.link(id, partner);
        Ok(id)
    }

    /// Adds `x` to subcluster `id` and returns the updated centroid.
    pub fn add_vector(
        &mut self,
        id: SubclusterId,
        x: &UnitVector,
    ) -> Result<&UnitVector, GraphError> {
        self.check_dimension(x)?;
        let node = self
            .nodes
            .get_mut(&id)
            .ok_or(GraphError::UnknownSubcluster(id))?;
        let mut sum = node.sum.clone();
        for (s, v) in sum.iter_mut().zip(x.as_slice()) {
            *s += v;
        }
        let count = node.count + 1;
        let c = centroid(&sum, count)?;
        node.sum = sum;
        node.count = count;
        node.centroid = c;
        let cluster = node.cluster;
        self.components
            .get_mut(&cluster)
            .expect("node cluster is registered")
            .vectors += 1;
        Ok(&self.nodes[&id].centroid)
    }

    fn link(&mut self, i: SubclusterId, j: SubclusterId) {
        self.nodes.get_mut(&i).unwrap().neighbors.insert(j);
        self.nodes.get_mut(&j).unwrap().neighbors.insert(i);
    }

    fn check_pair(&self, i: SubclusterId, j: SubclusterId) -> Result<(), GraphError> {
        if i == j {
            return Err(GraphError::SelfEdge(i));
        }
        self.subcluster(i)?;
        self.subcluster(j)?;
        Ok(())
    }

    /// Joins the components of `a` and `b` (distinct) under the id policy.
    fn join_clusters(&mut self, a: ClusterId, b: ClusterId) -> ComponentChange {
        debug_assert_ne!(a, b);
        let (va, vb) = (self.components[&a].vectors, self.components[&b].vectors);
        let (kept, retired) = if va > vb || (va == vb && a < b) {
            (a, b)
        } else {
            (b, a)
        };
        let gone = self.components.remove(&retired).unwrap();
        for m in &gone.members {
            self.nodes.get_mut(m).unwrap().cluster = kept;
        }
        let comp = self.components.get_mut(&kept).unwrap();
        comp.vectors += gone.vectors;
        comp.members.extend(gone.members);
        ComponentChange::Joined { kept, retired }
    }

    pub fn add_edge(
        &mut self,
        i: SubclusterId,
        j: SubclusterId,
    ) -> Result<ComponentChange, GraphError> {
        self.check_pair(i, j)?;
        self.link(i, j);
        let (ci, cj) = (self.nodes[&i].cluster, self.nodes[&j].cluster);
        Ok(if ci == cj {
            ComponentChange::Unchanged
        } else {
            self.join_clusters(ci, cj)
        })
    }

    pub fn remove_edge(
        &mut self,
        i: SubclusterId,
        j: SubclusterId,
    ) -> Result<ComponentChange, GraphError> {
        self.check_pair(i, j)?;
        if !self.has_edge(i, j) {
            return Err(GraphError::MissingEdge(i, j));
        }
        self.nodes.get_mut(&i).unwrap().neighbors.remove(&j);
        self.nodes.get_mut(&j).unwrap().neighbors.remove(&i);

        let Some(side_i) = self.reach_unless(i, j) else {
            return Ok(ComponentChange::Unchanged);
        };
        let old = self.nodes[&i].cluster;
        let comp = self.components.remove(&old).unwrap();
        let side_j: BTreeSet<SubclusterId> = comp.members.difference(&side_i).copied().collect();
        let count = |side: &BTreeSet<SubclusterId>| -> u64 {
            side.iter().map(|m| self.nodes[m].count).sum()
        };
        let (vi, vj) = (count(&side_i), count(&side_j));
        let i_keeps = match vi.cmp(&vj) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => side_i.first() < side_j.first(),
        };
        let ((keep_set, keep_vec), (new_set, new_vec)) = if i_keeps {
            ((side_i, vi), (side_j, vj))
        } else {
            ((side_j, vj), (side_i, vi))
        };
        let minted = self.mint_cluster();
        for m in &new_set {
            self.nodes.get_mut(m).unwrap().cluster = minted;
        }
        self.components.insert(
            old,
            Component {
                members: keep_set,
                vectors: keep_vec,
            },
        );
        self.components.insert(
            minted,
            Component {
                members: new_set,
                vectors: new_vec,
            },
        );
        Ok(ComponentChange::Split { kept: old, minted })
    }

    /// Breadth-first search from `start`. Returns `None` as soon as `target`
    /// is reached, otherwise the full reachable set.
    fn reach_unless(
        &self,
        start: SubclusterId,
        target: SubclusterId,
    ) -> Option<BTreeSet<SubclusterId>> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for &m in &self.nodes[&n].neighbors {
                if m == target {
                    return None;
                }
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        Some(seen)
    }

    /// Replaces `i` and `j` by one node holding the vectors and edges of both.
    ///
    /// The survivor is the node with the larger count (ties: smaller id). If
    /// the two were in different clusters, the clusters join first.
    pub fn merge_subclusters(
        &mut self,
        i: SubclusterId,
        j: SubclusterId,
    ) -> Result<MergeOutcome, GraphError> {
        self.check_pair(i, j)?;
        let (ki, kj) = (self.nodes[&i].count, self.nodes[&j].count);
        let (survivor, absorbed) = if ki > kj || (ki == kj && i < j) {
            (i, j)
        } else {
            (j, i)
        };
        let mut sum = self.nodes[&survivor].sum.clone();
        for (s, v) in sum.iter_mut().zip(&self.nodes[&absorbed].sum) {
            *s += v;
        }
        let count = ki + kj;
        let merged_centroid = centroid(&sum, count)?;

        let (cs, ca) = (self.nodes[&survivor].cluster, self.nodes[&absorbed].cluster);
        let component = if cs == ca {
            ComponentChange::Unchanged
        } else {
            self.join_clusters(cs, ca)
        };

        let gone = self.nodes.remove(&absorbed).unwrap();
        for &n in &gone.neighbors {
            let nb = self.nodes.get_mut(&n).unwrap();
            nb.neighbors.remove(&absorbed);
            if n != survivor {
                nb.neighbors.insert(survivor);
            }
        }
        let cluster = gone.cluster;
        self.components
            .get_mut(&cluster)
            .unwrap()
            .members
            .remove(&absorbed);
        let node = self.nodes.get_mut(&survivor).unwrap();
        node.neighbors.remove(&absorbed);
        node.neighbors
            .extend(gone.neighbors.into_iter().filter(|&n| n != survivor));
        node.sum = sum;
        node.count = count;
        node.centroid = merged_centroid;
        Ok(MergeOutcome {
            survivor,
            absorbed,
            component,
        })
    }

    /// Checks every structural invariant against a from-scratch recomputation.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        let corrupt = |msg: String| Err(GraphError::Corrupt(msg));
        for (id, n) in &self.nodes {
            if n.id != *id {
                return corrupt(format!("node keyed {id} has id {}", n.id));
            }
            if id.0 >= self.next_subcluster_id {
                return corrupt(format!("subcluster id {id} not below counter"));
            }
            if n.count == 0 {
                return corrupt(format!("subcluster {id} is empty"));
            }
            if n.sum.len() != self.dimension {
                return corrupt(format!("subcluster {id} has wrong dimension"));
            }
            if n.neighbors.contains(id) {
                return corrupt(format!("self-loop on {id}"));
            }
            for m in &n.neighbors {
                match self.nodes.get(m) {
                    Some(other) if other.neighbors.contains(id) => {}
                    Some(_) => return corrupt(format!("edge {id}-{m} is one-sided")),
                    None => return corrupt(format!("edge {id}-{m} points nowhere")),
                }
            }
            if centroid(&n.sum, n.count)? != n.centroid {
                return corrupt(format!("stale centroid on {id}"));
            }
        }
        let partition = bfs_partition(&self.nodes);
        if partition.len() != self.components.len() {
            return corrupt(format!(
                "{} components recorded, {} found",
                self.components.len(),
                partition.len()
            ));
        }
        for group in &partition {
            let cluster = self.nodes[group.first().unwrap()].cluster;
            let Some(comp) = self.components.get(&cluster) else {
                return corrupt(format!("cluster {cluster} not registered"));
            };
            if comp.members != *group {
                return corrupt(format!("cluster {cluster} members disagree with search"));
            }
            if group.iter().any(|m| self.nodes[m].cluster != cluster) {
                return corrupt(format!("cluster {cluster} labels disagree"));
            }
            let vectors: u64 = group.iter().map(|m| self.nodes[m].count).sum();
            if comp.vectors != vectors {
                return corrupt(format!("cluster {cluster} vector total is stale"));
            }
            if cluster.0 >= self.next_cluster_id {
                return corrupt(format!("cluster id {cluster} not below counter"));
            }
        }
        Ok(())
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            next_subcluster_id: self.next_subcluster_id,
            next_cluster_id: self.next_cluster_id,
            subclusters: self
                .nodes
                .values()
                .map(|n| SubclusterRecord {
                    id: n.id,
                    cluster: n.cluster,
                    count: n.count,
                    sum: n.sum.clone(),
                    neighbors: n.neighbors.iter().copied().collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds a graph from a snapshot, rejecting anything inconsistent.
    pub fn from_snapshot(dimension: usize, snap: GraphSnapshot) -> Result<Self, GraphError> {
        let mut graph = ClusterGraph::new(dimension)?;
        graph.next_subcluster_id = snap.next_subcluster_id;
        graph.next_cluster_id = snap.next_cluster_id;
        for rec in snap.subclusters {
            if rec.sum.len() != dimension {
                return Err(GraphError::DimensionMismatch {
                    expected: dimension,
                    found: rec.sum.len(),
                });
            }
            if rec.count == 0 {
                return Err(GraphError::Corrupt(format!(
                    "subcluster {} is empty",
                    rec.id
                )));
            }
            let c = centroid(&rec.sum, rec.count)?;
            let comp = graph
                .components
                .entry(rec.cluster)
                .or_insert_with(|| Component {
                    members: BTreeSet::new(),
                    vectors: 0,
                });
            comp.members.insert(rec.id);
            comp.vectors += rec.count;
            let node = Subcluster {
                id: rec.id,
                sum: rec.sum,
                count: rec.count,
                centroid: c,
                neighbors: rec.neighbors.into_iter().collect(),
                cluster: rec.cluster,
            };
            if graph.nodes.insert(rec.id, node).is_some() {
                return Err(GraphError::Corrupt(format!(
                    "duplicate subcluster {}",
                    rec.id
                )));
            }
        }
        graph.check_invariants()?;
        Ok(graph)
    }
}

/// Brute-force connected components by breadth-first labelling.
fn bfs_partition(nodes: &BTreeMap<SubclusterId, Subcluster>) -> Vec<BTreeSet<SubclusterId>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in nodes.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut group = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for &m in &nodes[&n].neighbors {
                if nodes.contains_key(&m) && seen.insert(m) {
                    group.insert(m);
                    queue.push_back(m);
                }
            }
        }
        out.push(group);
    }
    out
}

/// Serialized form of one subcluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubclusterRecord {
    pub id: SubclusterId,
    pub cluster: ClusterId,
    pub count: u64,
    pub sum: Vec<f64>,
    pub neighbors: Vec<SubclusterId>,
}

/// Serialized form of a [`ClusterGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub next_subcluster_id: u64,
    pub next_cluster_id: u64,
    pub subclusters: Vec<SubclusterRecord>,
}
