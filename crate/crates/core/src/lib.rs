//! Online clustering of unit vectors on the hypersphere.
//!
//! Vectors arrive one at a time. Each is absorbed into a small, tight
//! *subcluster*; subclusters are linked into a graph whose connected
//! components are the reported *clusters*. Link thresholds depend on how many
//! vectors each subcluster holds, so a cluster's extent tracks the angular
//! spread its members imply.
//!
//! ```
//! use links::{LinksClusterer, LinksConfig};
//!
//! let mut c = LinksClusterer::new(LinksConfig::new(3, 0.8, 0.95, 0.9)).unwrap();
//! let a = c.add_raw(&[1.0, 0.0, 0.0]).unwrap();
//! let b = c.add_raw(&[0.0, 1.0, 0.0]).unwrap();
//! assert_ne!(a.cluster_id, b.cluster_id);
//! ```

pub mod cli;
pub mod clusterer;
pub mod eval;
pub mod graph;
pub mod hypersphere;
pub mod records;
pub mod thresholds;

pub use clusterer::{
    restore, restore_with_dimension, Action, AddResult, ClusterError, ClusterStats, LinearScan,
    LinksClusterer, NearestCentroid, Snapshot, SnapshotError,
};
pub use eval::{
    hungarian_max_assignment, match_labels, matched_accuracy, tune_grid, Assignment, EvalError,
    MatchReport, TuneReport, TuningGrid,
};
pub use graph::{ClusterGraph, ClusterId, GraphError, SubclusterId};
pub use hypersphere::{
    cos_sim, generate_labeled_stream, normalize, theta_mode, AngularGaussian, CenterLayout,
    GenerativeParams, GeometryError, LabeledStream, UnitVector,
};
pub use thresholds::{LinksConfig, Thresholds};
