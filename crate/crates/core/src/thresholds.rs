//! Cosine-similarity thresholds as functions of subcluster sizes.
//!
//! `T_c` is the cluster similarity threshold, `T_s` the subcluster similarity
//! threshold and `T_p` the pair similarity maximum. For subclusters holding
//! `k` and `k'` vectors the pair threshold is
//!
//! ```text
//! s(k, k') = 1 / sqrt((1 + (1/T_c² - 1)/k) · (1 + (1/T_c² - 1)/k'))
//! ```
//!
//! with `s(k) = s(k, 1)` the threshold for a single new vector. The
//! interpolated variants keep `s(1, 1) = T_c²` but move the large-`k` limit
//! from 1 down to `T_p`:
//!
//! ```text
//! s̃(k, k') = T_c² + (T_p - T_c²)/(1 - T_c²) · (s(k, k') - T_c²)
//! ```

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("subcluster size must be at least 1")]
    ZeroCount,
    #[error("cluster similarity threshold {0} is outside (0, 1]")]
    ClusterThreshold(f64),
    #[error("interpolation needs a cluster similarity threshold in (0, 1), got {0}")]
    Interpolation(f64),
    #[error("pair similarity maximum {0} is not finite")]
    PairMaximum(f64),
}

fn check_count(k: u64) -> Result<(), ThresholdError> {
    if k == 0 {
        Err(ThresholdError::ZeroCount)
    } else {
        Ok(())
    }
}

fn check_tc(tc: f64) -> Result<(), ThresholdError> {
    if tc.is_finite() && tc > 0.0 && tc <= 1.0 {
        Ok(())
    } else {
        Err(ThresholdError::ClusterThreshold(tc))
    }
}

#[inline]
fn single_raw(k: u64, tc: f64) -> f64 {
    let inv_k = 1.0 / k as f64;
    let tc2 = tc * tc;
    tc2 / (inv_k + (1.0 - inv_k) * tc2).sqrt()
}

#[inline]
fn pair_raw(k: u64, k2: u64, tc: f64) -> f64 {
    let excess = 1.0 / (tc * tc) - 1.0;
    1.0 / ((1.0 + excess / k as f64) * (1.0 + excess / k2 as f64)).sqrt()
}

#[inline]
fn interpolate_raw(pair: f64, tc: f64, tp: f64) -> f64 {
    let tc2 = tc * tc;
    tc2 + (tp - tc2) / (1.0 - tc2) * (pair - tc2)
}

/// Threshold on `x · μ̂` for adding one vector `x` to the cluster of a
/// subcluster of size `k`: `T_c² / sqrt(1/k + (1 - 1/k) T_c²)`.
pub fn s_single(k: u64, tc: f64) -> Result<f64, ThresholdError> {
    check_count(k)?;
    check_tc(tc)?;
    Ok(single_raw(k, tc))
}

/// Threshold on `μ̂ · μ̂'` for two subclusters of sizes `k` and `k2` to belong
/// to the same cluster.
pub fn s_pair(k: u64, k2: u64, tc: f64) -> Result<f64, ThresholdError> {
    check_count(k)?;
    check_count(k2)?;
    check_tc(tc)?;
    Ok(pair_raw(k, k2, tc))
}

/// Pair threshold interpolated between `T_c²` at `(1, 1)` and `T_p` in the limit.
pub fn s_tilde_pair(k: u64, k2: u64, tc: f64, tp: f64) -> Result<f64, ThresholdError> {
    check_count(k)?;
    check_count(k2)?;
    if !(tc.is_finite() && tc > 0.0 && tc < 1.0) {
        return Err(ThresholdError::Interpolation(tc));
    }
    if !tp.is_finite() {
        return Err(ThresholdError::PairMaximum(tp));
    }
    Ok(interpolate_raw(pair_raw(k, k2, tc), tc, tp))
}

/// `s̃(k) = s̃(k, 1)`.
pub fn s_tilde_single(k: u64, tc: f64, tp: f64) -> Result<f64, ThresholdError> {
    s_tilde_pair(k, 1, tc, tp)
}

/// Hyperparameters of the online clusterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinksConfig {
    /// `T_c`, the cluster similarity threshold (cosine of the member-to-centre angle).
    #[serde(rename = "t_c")]
    pub cluster_threshold: f64,
    /// `T_s`, the subcluster similarity threshold.
    #[serde(rename = "t_s")]
    pub subcluster_threshold: f64,
    /// `T_p`, the pair similarity maximum. Ignored unless `use_anisotropy` is set.
    #[serde(rename = "t_p")]
    pub pair_max: f64,
    pub dimension: usize,
    pub use_anisotropy: bool,
    /// Reject inputs whose norm is off by more than `INGEST_NORM_TOLERANCE`
    /// instead of renormalizing them.
    pub strict_unit_norm: bool,
}

impl LinksConfig {
    /// Anisotropy on, lenient ingest.
    pub fn new(dimension: usize, t_c: f64, t_s: f64, t_p: f64) -> Self {
        LinksConfig {
            cluster_threshold: t_c,
            subcluster_threshold: t_s,
            pair_max: t_p,
            dimension,
            use_anisotropy: true,
            strict_unit_norm: false,
        }
    }

    pub fn without_anisotropy(mut self) -> Self {
        self.use_anisotropy = false;
        self
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict_unit_norm = strict;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigErrors> {
        validate_config(self)
    }
}

/// One violated bound of a [`LinksConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub value: f64,
    pub bound: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} violates {}", self.field, self.value, self.bound)
    }
}

/// Every violated bound of a [`LinksConfig`], in field order.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigViolation>);

impl ConfigErrors {
    pub fn violations(&self) -> &[ConfigViolation] {
        &self.0
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.0.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: ")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn open_unit(x: f64) -> bool {
    x.is_finite() && x > 0.0 && x < 1.0
}

/// Checks `0 < T_c < 1`, `0 < T_s < 1`, `T_c² ≤ T_p < 1` (when anisotropy is
/// on) and `N ≥ 2`, reporting every violation.
pub fn validate_config(cfg: &LinksConfig) -> Result<(), ConfigErrors> {
    let mut out = Vec::new();
    if !open_unit(cfg.cluster_threshold) {
        out.push(ConfigViolation {
            field: "t_c",
            value: cfg.cluster_threshold,
            bound: "0 < t_c < 1".into(),
        });
    }
    if !open_unit(cfg.subcluster_threshold) {
        out.push(ConfigViolation {
            field: "t_s",
            value: cfg.subcluster_threshold,
            bound: "0 < t_s < 1".into(),
        });
    }
    if cfg.use_anisotropy {
        let tp = cfg.pair_max;
        if !(tp.is_finite() && tp < 1.0) {
            out.push(ConfigViolation {
                field: "t_p",
                value: tp,
                bound: "t_p < 1".into(),
            });
        }
        let tc2 = cfg.cluster_threshold * cfg.cluster_threshold;
        if tp.is_finite() && cfg.cluster_threshold.is_finite() && tp < tc2 {
            out.push(ConfigViolation {
                field: "t_p",
                value: tp,
                bound: format!("t_p >= t_c^2 = {tc2}"),
            });
        }
    }
    if cfg.dimension < 2 {
        out.push(ConfigViolation {
            field: "dimension",
            value: cfg.dimension as f64,
            bound: "dimension >= 2".into(),
        });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(ConfigErrors(out))
    }
}

/// The threshold functions bound to one validated configuration.
///
/// These evaluate exactly the same expressions as [`s_pair`] and
/// [`s_tilde_pair`], so values agree bit-for-bit with the free functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    tc: f64,
    ts: f64,
    tp: Option<f64>,
}

impl Thresholds {
    pub fn new(cfg: &LinksConfig) -> Result<Self, ConfigErrors> {
        validate_config(cfg)?;
        Ok(Thresholds {
            tc: cfg.cluster_threshold,
            ts: cfg.subcluster_threshold,
            tp: cfg.use_anisotropy.then_some(cfg.pair_max),
        })
    }

    pub fn subcluster(&self) -> f64 {
        self.ts
    }

    /// Threshold for two subclusters of sizes `k` and `k2` (both ≥ 1).
    #[inline]
    pub fn pair(&self, k: u64, k2: u64) -> f64 {
        debug_assert!(k > 0 && k2 > 0);
        let raw = pair_raw(k, k2, self.tc);
        match self.tp {
            Some(tp) => interpolate_raw(raw, self.tc, tp),
            None => raw,
        }
    }

    /// Threshold for linking a fresh single-vector subcluster to one of size `k`.
    #[inline]
    pub fn link(&self, k: u64) -> f64 {
        self.pair(k, 1)
    }

    /// The raw single-vector threshold `s(k)` used outside the clusterer.
    pub fn single(&self, k: u64) -> f64 {
        match self.tp {
            Some(_) => self.pair(k, 1),
            None => single_raw(k, self.tc),
        }
    }
}
