#![allow(dead_code)]

use links::graph::ComponentChange;
use links::hypersphere::{sample_uniform_sphere, UnitVector};
use links::{ClusterGraph, ClusterId, SubclusterId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

pub fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> UnitVector {
    sample_uniform_sphere(dim, rng).unwrap()
}

/// Connected components of an explicit edge list, found by repeated
/// relabelling until a fixpoint. Deliberately unlike the library's search.
pub fn brute_force_partition(
    nodes: &BTreeSet<SubclusterId>,
    edges: &BTreeSet<(SubclusterId, SubclusterId)>,
) -> BTreeSet<BTreeSet<SubclusterId>> {
    let mut label: BTreeMap<SubclusterId, SubclusterId> = nodes.iter().map(|&n| (n, n)).collect();
    loop {
        let mut changed = false;
        for &(a, b) in edges {
            let (la, lb) = (label[&a], label[&b]);
            if la != lb {
                let low = la.min(lb);
                for l in label.values_mut() {
                    if *l == la || *l == lb {
                        *l = low;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups: BTreeMap<SubclusterId, BTreeSet<SubclusterId>> = BTreeMap::new();
    for (n, l) in label {
        groups.entry(l).or_default().insert(n);
    }
    groups.into_values().collect()
}

pub fn graph_partition(g: &ClusterGraph) -> BTreeSet<BTreeSet<SubclusterId>> {
    g.components()
        .into_values()
        .map(|v| v.into_iter().collect())
        .collect()
}

pub fn graph_edges(g: &ClusterGraph) -> BTreeSet<(SubclusterId, SubclusterId)> {
    g.edges().map(|(a, b)| (a.min(b), a.max(b))).collect()
}

/// Tracks which subcluster holds every ingested vector by replaying the
/// merges each add reports.
#[derive(Default)]
pub struct Shadow {
    pub home: Vec<SubclusterId>,
}

impl Shadow {
    pub fn record(&mut self, r: &links::AddResult) {
        self.home.push(r.subcluster_id);
        for &(absorbed, survivor) in &r.merged {
            for h in self.home.iter_mut() {
                if *h == absorbed {
                    *h = survivor;
                }
            }
        }
        assert_eq!(*self.home.last().unwrap(), r.subcluster_id);
    }

    /// Final cluster of every vector.
    pub fn clusters(&self, g: &ClusterGraph) -> Vec<links::ClusterId> {
        self.home
            .iter()
            .map(|&s| g.component_of(s).unwrap())
            .collect()
    }
}

/// The graph under test plus a shadow edge list maintained independently.
pub struct Harness {
    pub graph: ClusterGraph,
    nodes: BTreeSet<SubclusterId>,
    edges: BTreeSet<(SubclusterId, SubclusterId)>,
    seen_cluster_ids: BTreeSet<ClusterId>,
}

fn key(a: SubclusterId, b: SubclusterId) -> (SubclusterId, SubclusterId) {
    (a.min(b), a.max(b))
}

impl Harness {
    pub fn new() -> Self {
        Harness {
            graph: ClusterGraph::new(4).unwrap(),
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
            seen_cluster_ids: BTreeSet::new(),
        }
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> SubclusterId {
        *self
            .nodes
            .iter()
            .nth(rng.random_range(0..self.nodes.len()))
            .unwrap()
    }

    pub fn step(&mut self, rng: &mut ChaCha8Rng) {
        let before: BTreeSet<ClusterId> = self.graph.components().into_keys().collect();
        let op = rng.random_range(0..100);
        let x = random_unit(4, rng);
        if self.nodes.len() < 2 || (op < 20 && self.nodes.len() < 50) {
            let id = self.graph.create_subcluster(&x).unwrap();
            self.nodes.insert(id);
        } else if op < 35 && self.nodes.len() < 50 {
            let partner = self.pick(rng);
            let id = self.graph.create_linked_subcluster(&x, partner).unwrap();
            self.nodes.insert(id);
            self.edges.insert(key(id, partner));
        } else if op < 65 {
            let (a, b) = (self.pick(rng), self.pick(rng));
            if a == b || self.edges.contains(&key(a, b)) {
                return;
            }
            let ca = self.graph.component_of(a).unwrap();
            let cb = self.graph.component_of(b).unwrap();
            let (sa, sb) = (
                self.graph.cluster_size(ca).unwrap(),
                self.graph.cluster_size(cb).unwrap(),
            );
            let change = self.graph.add_edge(a, b).unwrap();
            self.edges.insert(key(a, b));
            if ca != cb {
                let expected_kept = if sa > sb || (sa == sb && ca < cb) {
                    ca
                } else {
                    cb
                };
                assert_eq!(
                    change,
                    ComponentChange::Joined {
                        kept: expected_kept,
                        retired: if expected_kept == ca { cb } else { ca },
                    }
                );
            } else {
                assert_eq!(change, ComponentChange::Unchanged);
            }
        } else if op < 90 {
            if self.edges.is_empty() {
                return;
            }
            let (a, b) = *self
                .edges
                .iter()
                .nth(rng.random_range(0..self.edges.len()))
                .unwrap();
            let old = self.graph.component_of(a).unwrap();
            let change = self.graph.remove_edge(a, b).unwrap();
            self.edges.remove(&(a, b));
            if let ComponentChange::Split { kept, minted } = change {
                assert_eq!(kept, old);
                assert!(!self.seen_cluster_ids.contains(&minted));
                let kept_size = self.graph.cluster_size(kept).unwrap();
                let minted_size = self.graph.cluster_size(minted).unwrap();
                assert!(kept_size >= minted_size);
            }
        } else {
            let (a, b) = (self.pick(rng), self.pick(rng));
            if a == b {
                return;
            }
            let (ka, kb) = (
                self.graph.subcluster(a).unwrap().count(),
                self.graph.subcluster(b).unwrap().count(),
            );
            let out = self.graph.merge_subclusters(a, b).unwrap();
            let expected = if ka > kb || (ka == kb && a < b) { a } else { b };
            assert_eq!(out.survivor, expected);
            assert_eq!(self.graph.subcluster(expected).unwrap().count(), ka + kb);
            let gone = out.absorbed;
            self.nodes.remove(&gone);
            let moved: Vec<_> = self
                .edges
                .iter()
                .filter(|&&(p, q)| p == gone || q == gone)
                .copied()
                .collect();
            for (p, q) in moved {
                self.edges.remove(&(p, q));
                let other = if p == gone { q } else { p };
                if other != out.survivor {
                    self.edges.insert(key(other, out.survivor));
                }
            }
        }
        self.check(&before);
    }

    fn check(&mut self, before: &BTreeSet<ClusterId>) {
        assert_eq!(graph_edges(&self.graph), self.edges);
        let actual = graph_partition(&self.graph);
        assert_eq!(actual, brute_force_partition(&self.nodes, &self.edges));
        self.graph.check_invariants().unwrap();
        // Ids that newly appear were never used before.
        for id in self.graph.components().into_keys() {
            if !before.contains(&id) {
                assert!(
                    !self.seen_cluster_ids.contains(&id),
                    "cluster id {id} reused"
                );
            }
        }
        self.seen_cluster_ids.extend(before.iter().copied());
        self.seen_cluster_ids
            .extend(self.graph.components().into_keys());
    }
}

/// Best score and lexicographically smallest optimal partner list, by
/// enumerating every injection of the smaller side into the larger.
pub fn brute_force(m: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let (r, c) = (m.len(), m[0].len());
    let transposed = r > c;
    let (small, large) = if transposed { (c, r) } else { (r, c) };
    let at = |s: usize, l: usize| if transposed { m[l][s] } else { m[s][l] };
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(small);
    let mut used = vec![false; large];
    fn go(
        depth: usize,
        small: usize,
        large: usize,
        at: &dyn Fn(usize, usize) -> f64,
        current: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if depth == small {
            let score: f64 = current.iter().enumerate().map(|(s, &l)| at(s, l)).sum();
            // Enumeration is in lexicographic order, so only strict gains replace.
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                *best = Some((score, current.clone()));
            }
            return;
        }
        for l in 0..large {
            if !used[l] {
                used[l] = true;
                current.push(l);
                go(depth + 1, small, large, at, current, used, best);
                current.pop();
                used[l] = false;
            }
        }
    }
    go(0, small, large, &at, &mut current, &mut used, &mut best);
    best.unwrap()
}
