//! Accuracy under the best bijective relabelling, and grid-search tuning.
//!
//! Predicted cluster ids are arbitrary, so before scoring a run a subset of
//! them is mapped one-to-one onto a subset of the true labels so as to
//! maximize the number of correct records. That mapping is a maximum-weight
//! assignment on the contingency table, solved with the Hungarian method.

use crate::clusterer::LinksClusterer;
use crate::graph::ClusterId;
use crate::hypersphere::UnitVector;
use crate::thresholds::{validate_config, LinksConfig};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("score matrix is empty")]
    EmptyMatrix,
    #[error("score matrix row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("score matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("predicted and true label sequences differ in length ({predicted} vs {truth})")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("nothing to evaluate: the run is empty")]
    EmptyRun,
    #[error("tuning grid has no candidates")]
    EmptyGrid,
    #[error("no grid candidate passed validation")]
    NoValidCandidates,
    #[error("clustering failed during a trial: {0}")]
    Trial(String),
}

/// A maximum-score partial bijection between rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub score: f64,
}

/// Maximum-weight assignment of `min(R, C)` pairs.
///
/// Among optimal assignments the one returned is lexicographically smallest
/// when read as the partner index of each element of the smaller side in
/// order (rows when `R ≤ C`, columns otherwise).
pub fn hungarian_max_assignment(scores: &[Vec<f64>]) -> Result<Assignment, EvalError> {
    let rows = scores.len();
    if rows == 0 || scores[0].is_empty() {
        return Err(EvalError::EmptyMatrix);
    }
    let cols = scores[0].len();
    for (r, row) in scores.iter().enumerate() {
        if row.len() != cols {
            return Err(EvalError::Ragged {
                row: r,
                expected: cols,
                found: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite { row: r, col: c });
        }
    }
    let transposed = rows > cols;
    let (n, m) = if transposed {
        (cols, rows)
    } else {
        (rows, cols)
    };
    // Work on costs with n ≤ m.
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if transposed {
                        -scores[j][i]
                    } else {
                        -scores[i][j]
                    }
                })
                .collect()
        })
        .collect();
    let col_of_row = lexicographic_min_cost(&cost);
    let mut pairs: Vec<(usize, usize)> = col_of_row
        .iter()
        .enumerate()
        .map(|(i, &j)| if transposed { (j, i) } else { (i, j) })
        .collect();
    pairs.sort_unstable();
    let score = pairs.iter().map(|&(r, c)| scores[r][c]).sum();
    Ok(Assignment { pairs, score })
}

/// Potentials and matching from the shortest-augmenting-path Hungarian method.
struct Solved {
    /// Row potentials, 1-based.
    u: Vec<f64>,
    /// Column potentials, 1-based; `v[j] ≤ 0`, `v[j] = 0` for unmatched columns.
    v: Vec<f64>,
    col_of_row: Vec<usize>,
}

/// Min-cost assignment of every row of an `n × m` matrix, `n ≤ m`.
fn solve_min_cost(cost: &[Vec<f64>]) -> Solved {
    let n = cost.len();
    let m = cost[0].len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // row_of_col[j] = matched row (1-based), 0 for none.
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0usize; n];
    for j in 1..=m {
        if row_of_col[j] != 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    Solved { u, v, col_of_row }
}

/// Kuhn's augmenting-path bipartite matching: can every vertex in `left` be
/// matched along `adj`?
fn saturates(left: &[usize], adj: &[Vec<usize>], right_size: usize) -> bool {
    fn augment(
        l: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if owner[r].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[r] = Some(l);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; right_size];
    for &l in left {
        let mut seen = vec![false; right_size];
        if !augment(l, adj, &mut seen, &mut owner) {
            return false;
        }
    }
    true
}

/// Optimal min-cost assignment, lexicographically smallest in `col_of_row`.
///
/// Every optimal assignment uses only edges that are tight under the optimal
/// potentials and covers every column with a negative potential. The greedy
/// pass fixes rows in order to their smallest feasible tight column; by the
/// Mendelsohn-Dulmage theorem a completion exists exactly when the remaining
/// rows and the remaining required columns can each be saturated separately.
fn lexicographic_min_cost(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    let solved = solve_min_cost(cost);
    let scale = cost
        .iter()
        .flatten()
        .fold(1.0_f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-9 * scale * (n + m) as f64;
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (cost[i][j] - solved.u[i + 1] - solved.v[j + 1]).abs() <= tol)
                .collect()
        })
        .collect();
    let required: Vec<bool> = (0..m).map(|j| solved.v[j + 1] < -tol).collect();

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; m];
    for i in 0..n {
        let mut picked = None;
        for j in 0..m {
            if !tight[i][j] || used[j] {
                continue;
            }
            used[j] = true;
            if completion_exists(i + 1, &tight, &required, &used) {
                picked = Some(j);
                break;
            }
            used[j] = false;
        }
        match picked {
            Some(j) => chosen.push(j),
            // Tolerance misclassified an edge; fall back to the raw optimum.
            None => return solved.col_of_row,
        }
    }
    chosen
}

fn completion_exists(
    first_row: usize,
    tight: &[Vec<bool>],
    required: &[bool],
    used: &[bool],
) -> bool {
    let n = tight.len();
    let m = required.len();
    let free_cols: Vec<usize> = (0..m).filter(|&j| !used[j]).collect();
    // Rows → free tight columns.
    let row_adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            if i < first_row {
                Vec::new()
            } else {
                free_cols.iter().copied().filter(|&j| tight[i][j]).collect()
            }
        })
        .collect();
    let rows: Vec<usize> = (first_row..n).collect();
    if !saturates(&rows, &row_adj, m) {
        return false;
    }
    let need: Vec<usize> = free_cols.iter().copied().filter(|&j| required[j]).collect();
    if need.is_empty() {
        return true;
    }
    let col_adj: Vec<Vec<usize>> = (0..m)
        .map(|j| (first_row..n).filter(|&i| tight[i][j]).collect())
        .collect();
    saturates(&need, &col_adj, n)
}

/// Outcome of matching predicted ids against true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport<P, L> {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Predicted id → true label, for matched ids only.
    pub mapping: BTreeMap<P, L>,
}

/// Contingency counts and optimal relabelling of `predicted` onto `truth`.
pub fn match_labels<P, L>(predicted: &[P], truth: &[L]) -> Result<MatchReport<P, L>, EvalError>
where
    P: Ord + Clone,
    L: Ord + Clone,
{
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    let p_index: BTreeMap<P, usize> = index_of(predicted);
    let t_index: BTreeMap<L, usize> = index_of(truth);
    let mut table = vec![vec![0.0; t_index.len()]; p_index.len()];
    for (p, t) in predicted.iter().zip(truth) {
        table[p_index[p]][t_index[t]] += 1.0;
    }
    let assignment = hungarian_max_assignment(&table)?;
    let p_keys: Vec<&P> = p_index.keys().collect();
    let t_keys: Vec<&L> = t_index.keys().collect();
    let mut mapping = BTreeMap::new();
    let mut correct = 0usize;
    for &(r, c) in &assignment.pairs {
        correct += table[r][c] as usize;
        if table[r][c] > 0.0 {
            mapping.insert(p_keys[r].clone(), t_keys[c].clone());
        }
    }
    Ok(MatchReport {
        accuracy: correct as f64 / predicted.len() as f64,
        correct,
        total: predicted.len(),
        mapping,
    })
}

/// Fraction of records whose predicted id maps to their true label under the
/// best bijection. Unmatched predicted ids count as wrong.
fn index_of<T: Ord + Clone>(items: &[T]) -> BTreeMap<T, usize> {
    let mut sorted = items.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, i))
        .collect()
}

pub fn matched_accuracy<P, L>(predicted: &[P], truth: &[L]) -> Result<f64, EvalError>
where
    P: Ord + Clone,
    L: Ord + Clone,
{
    match_labels(predicted, truth).map(|r| r.accuracy)
}

/// Scores one clustering run against ground truth; higher is better.
pub trait Objective: Sync {
    fn score(&self, predicted: &[ClusterId], truth: &[usize]) -> Result<f64, EvalError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MatchedAccuracy;

impl Objective for MatchedAccuracy {
    fn score(&self, predicted: &[ClusterId], truth: &[usize]) -> Result<f64, EvalError> {
        matched_accuracy(predicted, truth)
    }
}

/// Runs a fresh clusterer over `stream`, returning the id emitted for each record.
pub fn run_stream(
    config: &LinksConfig,
    stream: &[(usize, UnitVector)],
) -> Result<(Vec<ClusterId>, LinksClusterer), EvalError> {
    let mut clusterer =
        LinksClusterer::new(config.clone()).map_err(|e| EvalError::Trial(e.to_string()))?;
    let predicted = stream
        .iter()
        .map(|(_, x)| clusterer.add_vector(x).map(|r| r.cluster_id))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| EvalError::Trial(e.to_string()))?;
    Ok((predicted, clusterer))
}

/// Candidate values for each threshold; every combination is tried.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    pub t_c: Vec<f64>,
    pub t_s: Vec<f64>,
    pub t_p: Vec<f64>,
    /// Dimension and mode flags shared by every trial; its thresholds are overwritten.
    pub base: LinksConfig,
}

impl TuningGrid {
    pub fn candidates(&self) -> Vec<LinksConfig> {
        let mut out = Vec::new();
        for &t_c in &self.t_c {
            for &t_s in &self.t_s {
                for &t_p in &self.t_p {
                    out.push(LinksConfig {
                        cluster_threshold: t_c,
                        subcluster_threshold: t_s,
                        pair_max: t_p,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    #[serde(rename = "T_c")]
    pub t_c: f64,
    #[serde(rename = "T_s")]
    pub t_s: f64,
    #[serde(rename = "T_p")]
    pub t_p: f64,
    pub accuracy: f64,
    pub clusters_found: usize,
}

impl TrialRow {
    fn key_cmp(&self, other: &TrialRow) -> std::cmp::Ordering {
        self.t_c
            .total_cmp(&other.t_c)
            .then(self.t_s.total_cmp(&other.t_s))
            .then(self.t_p.total_cmp(&other.t_p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCandidate {
    pub t_c: f64,
    pub t_s: f64,
    pub t_p: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    /// One row per evaluated candidate, in grid order.
    pub rows: Vec<TrialRow>,
    pub skipped: Vec<SkippedCandidate>,
    /// Index into `rows` of the winner.
    pub best: usize,
}

impl TuneReport {
    pub fn best_row(&self) -> &TrialRow {
        &self.rows[self.best]
    }

    pub fn best_config(&self, base: &LinksConfig) -> LinksConfig {
        let row = self.best_row();
        LinksConfig {
            cluster_threshold: row.t_c,
            subcluster_threshold: row.t_s,
            pair_max: row.t_p,
            ..base.clone()
        }
    }

    /// CSV with header `T_c,T_s,T_p,accuracy,clusters_found`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid search with the default [`MatchedAccuracy`] objective.
pub fn tune_grid(
    grid: &TuningGrid,
    stream: &[(usize, UnitVector)],
) -> Result<TuneReport, EvalError> {
    tune_grid_with(grid, stream, &MatchedAccuracy)
}

/// Runs every valid candidate on its own clusterer (in parallel) and picks
/// the highest score; ties go to the lexicographically smallest `(T_c, T_s, T_p)`.
pub fn tune_grid_with<O: Objective>(
    grid: &TuningGrid,
    stream: &[(usize, UnitVector)],
    objective: &O,
) -> Result<TuneReport, EvalError> {
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if stream.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    let truth: Vec<usize> = stream.iter().map(|(l, _)| *l).collect();
    let (valid, invalid): (Vec<_>, Vec<_>) = candidates
        .into_iter()
        .map(|cfg| {
            let check = validate_config(&cfg);
            (cfg, check)
        })
        .partition(|(_, check)| check.is_ok());
    let skipped = invalid
        .into_iter()
        .map(|(cfg, check)| SkippedCandidate {
            t_c: cfg.cluster_threshold,
            t_s: cfg.subcluster_threshold,
            t_p: cfg.pair_max,
            reason: check.unwrap_err().to_string(),
        })
        .collect();
    if valid.is_empty() {
        return Err(EvalError::NoValidCandidates);
    }
    let rows = valid
        .par_iter()
        .map(|(cfg, _)| {
            let (predicted, clusterer) = run_stream(cfg, stream)?;
            Ok(TrialRow {
                t_c: cfg.cluster_threshold,
                t_s: cfg.subcluster_threshold,
                t_p: cfg.pair_max,
                accuracy: objective.score(&predicted, &truth)?,
                clusters_found: clusterer.graph().cluster_count(),
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        let incumbent = &rows[best];
        let better = match row.accuracy.total_cmp(&incumbent.accuracy) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => row.key_cmp(incumbent).is_lt(),
        };
        if better {
            best = i;
        }
    }
    Ok(TuneReport {
        rows,
        skipped,
        best,
    })
}
