//! Geometry on the unit hypersphere and the angular-Gaussian cluster model.
//!
//! Everything in this crate lives on `S^{N-1}`. Proximity is measured by the
//! angle between vectors, and clusters are generated by an isotropic density
//! centred on a latent unit vector whose marginal in the angle `θ` to the
//! centre is
//!
//! ```text
//! ρ(θ) = A · sin(θ)^(N-2) · exp(-θ² / 2σ²),   A = 2π^((N-1)/2) / Γ((N-1)/2)
//! ```
//!
//! In high dimension this marginal is sharply peaked, so cluster members sit
//! at an almost constant angle `θ_c` from their centre. [`theta_mode`] is the
//! value of `θ_c` used throughout the crate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::fmt;
use thiserror::Error;

/// Allowed deviation of a [`UnitVector`] norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Inputs whose norm deviates from 1 by more than this are rejected in strict mode.
pub const INGEST_NORM_TOLERANCE: f64 = 1e-6;

/// Number of grid points for the inverse-CDF angle sampler.
pub const THETA_GRID_POINTS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate vector: norm is zero")]
    DegenerateVector,
    #[error("degenerate centroid: vector sum has zero norm")]
    DegenerateCentroid,
    #[error("non-finite component at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {found} is too small (need at least {min})")]
    InvalidDimension { found: usize, min: usize },
    #[error("vector norm {0} is not within {INGEST_NORM_TOLERANCE} of 1")]
    NotUnit(f64),
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("centroid count must be positive")]
    ZeroCount,
    #[error("cannot place {clusters} simplex centers in dimension {dimension}")]
    SimplexTooLarge { clusters: usize, dimension: usize },
    #[error("at least one cluster is required")]
    NoClusters,
    #[error(
        "no center layout reached separation {required:.6} rad after {attempts} attempts \
         (best {best:.6} rad)"
    )]
    SeparationNotReached {
        required: f64,
        attempts: u32,
        best: f64,
    },
}

/// A finite vector of Euclidean length 1 (within [`UNIT_NORM_TOLERANCE`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `components`; see [`normalize`].
    pub fn new(components: &[f64]) -> Result<Self, GeometryError> {
        normalize(components)
    }

    /// Accepts a vector that is already unit length within [`INGEST_NORM_TOLERANCE`],
    /// renormalizing it to remove the residual error.
    pub fn strict(components: &[f64]) -> Result<Self, GeometryError> {
        check_finite(components)?;
        let norm = euclidean_norm(components);
        if (norm - 1.0).abs() > INGEST_NORM_TOLERANCE {
            return Err(GeometryError::NotUnit(norm));
        }
        normalize(components)
    }

    /// The `axis`-th standard basis vector of dimension `dimension`.
    pub fn basis(dimension: usize, axis: usize) -> Self {
        assert!(
            axis < dimension,
            "axis {axis} out of range for dimension {dimension}"
        );
        let mut v = vec![0.0; dimension];
        v[axis] = 1.0;
        UnitVector(v)
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Raw dot product, no clamping and no dimension check.
    #[inline]
    pub(crate) fn dot_unchecked(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// The negated vector.
    pub fn negated(&self) -> UnitVector {
        UnitVector(self.0.iter().map(|c| -c).collect())
    }
}

impl fmt::Display for UnitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        normalize(&v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(v: UnitVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn euclidean_norm(v: &[f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm.is_finite() && norm > 0.0 {
        return norm;
    }
    // Over/underflow in the plain sum of squares; rescale by the largest magnitude.
    let scale = v.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let scaled: f64 = v.iter().map(|c| (c / scale) * (c / scale)).sum();
    scale * scaled.sqrt()
}

fn check_finite(v: &[f64]) -> Result<(), GeometryError> {
    match v.iter().position(|c| !c.is_finite()) {
        Some(i) => Err(GeometryError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize(v: &[f64]) -> Result<UnitVector, GeometryError> {
    if v.len() < 2 {
        return Err(GeometryError::InvalidDimension {
            found: v.len(),
            min: 2,
        });
    }
    check_finite(v)?;
    let norm = euclidean_norm(v);
    if norm == 0.0 {
        return Err(GeometryError::DegenerateVector);
    }
    Ok(UnitVector(v.iter().map(|c| c / norm).collect()))
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cos_sim(u: &UnitVector, v: &UnitVector) -> Result<f64, GeometryError> {
    if u.dimension() != v.dimension() {
        return Err(GeometryError::DimensionMismatch {
            expected: u.dimension(),
            found: v.dimension(),
        });
    }
    Ok(u.dot_unchecked(v).clamp(-1.0, 1.0))
}

/// Angle in radians between two unit vectors, in `[0, π]`.
pub fn angle(u: &UnitVector, v: &UnitVector) -> Result<f64, GeometryError> {
    cos_sim(u, v).map(f64::acos)
}

/// Centroid of `count` unit vectors given their component-wise sum.
///
/// Under the high-dimensional approximation the maximum-likelihood centre is
/// the running sum scaled to unit length, so that is what is returned.
pub fn centroid(sum: &[f64], count: u64) -> Result<UnitVector, GeometryError> {
    if count == 0 {
        return Err(GeometryError::ZeroCount);
    }
    normalize(sum).map_err(|e| match e {
        GeometryError::DegenerateVector => GeometryError::DegenerateCentroid,
        other => other,
    })
}

fn gaussian_vector<R: Rng + ?Sized>(dimension: usize, rng: &mut R) -> Vec<f64> {
    (0..dimension).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws a point from the uniform (rotation-invariant) distribution on `S^{N-1}`.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(
    dimension: usize,
    rng: &mut R,
) -> Result<UnitVector, GeometryError> {
    if dimension < 2 {
        return Err(GeometryError::InvalidDimension {
            found: dimension,
            min: 2,
        });
    }
    loop {
        if let Ok(v) = normalize(&gaussian_vector(dimension, rng)) {
            return Ok(v);
        }
    }
}

fn check_model(dimension: usize, sigma: f64) -> Result<(), GeometryError> {
    if dimension < 3 {
        return Err(GeometryError::InvalidDimension {
            found: dimension,
            min: 3,
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(GeometryError::InvalidSigma(sigma));
    }
    Ok(())
}

/// Natural log of the hypersurface area of `S^{N-2}`.
fn ln_sphere_area(dimension: usize) -> f64 {
    let half = (dimension as f64 - 1.0) / 2.0;
    std::f64::consts::LN_2 + half * std::f64::consts::PI.ln() - ln_gamma(half)
}

/// Log of [`marginal_theta_density`]; `-inf` where the density vanishes.
pub fn ln_marginal_theta_density(theta: f64, sigma: f64, dimension: usize) -> f64 {
    let sin = theta.sin();
    if sin <= 0.0 {
        return f64::NEG_INFINITY;
    }
    ln_sphere_area(dimension) + (dimension as f64 - 2.0) * sin.ln()
        - theta * theta / (2.0 * sigma * sigma)
}

/// Unnormalized marginal density of the angle between a cluster member and its centre.
pub fn marginal_theta_density(theta: f64, sigma: f64, dimension: usize) -> f64 {
    ln_marginal_theta_density(theta, sigma, dimension).exp()
}

/// Mode of the angular marginal: the root of `(N-2)·cot θ = θ/σ²` in `(0, π/2)`.
pub fn theta_mode(dimension: usize, sigma: f64) -> Result<f64, GeometryError> {
    check_model(dimension, sigma)?;
    let m = dimension as f64 - 2.0;
    let inv_var = 1.0 / (sigma * sigma);
    // Strictly decreasing on (0, π): +inf at 0+, negative at π/2.
    let g = |t: f64| m * t.cos() / t.sin() - t * inv_var;
    let (mut lo, mut hi) = (0.0_f64, std::f64::consts::FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sampler for cluster members of the angular-Gaussian model at a fixed `(N, σ)`.
///
/// The angle is drawn by inverse CDF on a uniform grid of [`THETA_GRID_POINTS`]
/// points over `[0, min(π, θ_mode + 8σ)]`, interpolating linearly between grid
/// points. The direction in the tangent hyperplane is uniform.
#[derive(Debug, Clone)]
pub struct AngularGaussian {
    dimension: usize,
    sigma: f64,
    mode: f64,
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl AngularGaussian {
    pub fn new(dimension: usize, sigma: f64) -> Result<Self, GeometryError> {
        let mode = theta_mode(dimension, sigma)?;
        let upper = std::f64::consts::PI.min(mode + 8.0 * sigma);
        let n = THETA_GRID_POINTS;
        let step = upper / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        let ln_peak = ln_marginal_theta_density(mode, sigma, dimension);
        let density: Vec<f64> = grid
            .iter()
            .map(|&t| (ln_marginal_theta_density(t, sigma, dimension) - ln_peak).exp())
            .collect();
        let mut cdf = Vec::with_capacity(n);
        cdf.push(0.0);
        for i in 1..n {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * (density[i - 1] + density[i]) * step);
        }
        let total = cdf[n - 1];
        for c in &mut cdf {
            *c /= total;
        }
        Ok(AngularGaussian {
            dimension,
            sigma,
            mode,
            grid,
            cdf,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `θ_c`, the characteristic member-to-centre angle.
    pub fn mode(&self) -> f64 {
        self.mode
    }

    /// Draws an angle to the centre.
    pub fn sample_angle<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // First index with cdf > u; at least 1 because cdf[0] = 0 <= u.
        let hi = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1);
        let lo = hi - 1;
        let span = self.cdf[hi] - self.cdf[lo];
        let frac = if span > 0.0 {
            (u - self.cdf[lo]) / span
        } else {
            0.0
        };
        self.grid[lo] + frac * (self.grid[hi] - self.grid[lo])
    }

    /// Draws a cluster member around `center`.
    pub fn sample_point<R: Rng + ?Sized>(
        &self,
        center: &UnitVector,
        rng: &mut R,
    ) -> Result<UnitVector, GeometryError> {
        if center.dimension() != self.dimension {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dimension,
                found: center.dimension(),
            });
        }
        let theta = self.sample_angle(rng);
        let tangent = loop {
            let mut g = gaussian_vector(self.dimension, rng);
            let along = dot(&g, center.as_slice());
            for (gi, ci) in g.iter_mut().zip(center.as_slice()) {
                *gi -= along * ci;
            }
            if let Ok(t) = normalize(&g) {
                break t;
            }
        };
        let (s, c) = theta.sin_cos();
        let point: Vec<f64> = center
            .as_slice()
            .iter()
            .zip(tangent.as_slice())
            .map(|(m, t)| c * m + s * t)
            .collect();
        normalize(&point)
    }
}

/// One-off draw of a cluster member; builds the angle table on every call, so
/// prefer [`AngularGaussian`] for repeated sampling.
pub fn sample_cluster_point<R: Rng + ?Sized>(
    center: &UnitVector,
    sigma: f64,
    rng: &mut R,
) -> Result<UnitVector, GeometryError> {
    AngularGaussian::new(center.dimension(), sigma)?.sample_point(center, rng)
}

/// How cluster centres are placed by [`generate_labeled_stream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterLayout {
    /// Independent uniform draws on the sphere.
    #[default]
    Uniform,
    /// Vertices of a randomly oriented regular simplex: every pair of centres
    /// has cosine `-1/(K-1)`, the largest minimum separation `K` points can have.
    Simplex,
}

impl std::str::FromStr for CenterLayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(CenterLayout::Uniform),
            "simplex" => Ok(CenterLayout::Simplex),
            other => Err(format!(
                "unknown center layout `{other}` (expected uniform or simplex)"
            )),
        }
    }
}

impl fmt::Display for CenterLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CenterLayout::Uniform => "uniform",
            CenterLayout::Simplex => "simplex",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeParams {
    pub dimension: usize,
    /// Angular spread in radians.
    pub sigma: f64,
    pub num_clusters: usize,
    pub points_per_cluster: usize,
    pub seed: u64,
    #[serde(default)]
    pub layout: CenterLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub label: usize,
    pub vector: UnitVector,
}

/// Output of [`generate_labeled_stream`]: the latent centres and the shuffled records.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub params: GenerativeParams,
    pub centers: Vec<UnitVector>,
    pub records: Vec<LabeledPoint>,
}

impl LabeledStream {
    /// Smallest pairwise angle between centres, `None` for a single cluster.
    pub fn min_center_angle(&self) -> Option<f64> {
        min_pairwise_angle(&self.centers)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }
}

pub fn min_pairwise_angle(points: &[UnitVector]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let t = a.dot_unchecked(b).clamp(-1.0, 1.0).acos();
            best = Some(best.map_or(t, |m| m.min(t)));
        }
    }
    best
}

fn simplex_centers<R: Rng + ?Sized>(
    dimension: usize,
    clusters: usize,
    rng: &mut R,
) -> Result<Vec<UnitVector>, GeometryError> {
    if clusters > dimension {
        return Err(GeometryError::SimplexTooLarge {
            clusters,
            dimension,
        });
    }
    if clusters == 1 {
        return Ok(vec![sample_uniform_sphere(dimension, rng)?]);
    }
    // Random orthonormal frame by Gram-Schmidt, then centre the frame vectors.
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(clusters);
    while frame.len() < clusters {
        let mut g = gaussian_vector(dimension, rng);
        for q in &frame {
            let d = dot(&g, q);
            for (gi, qi) in g.iter_mut().zip(q) {
                *gi -= d * qi;
            }
        }
        if let Ok(q) = normalize(&g) {
            frame.push(q.into_inner());
        }
    }
    let mut mean = vec![0.0; dimension];
    for q in &frame {
        for (m, qi) in mean.iter_mut().zip(q) {
            *m += qi / clusters as f64;
        }
    }
    frame
        .iter()
        .map(|q| {
            let shifted: Vec<f64> = q.iter().zip(&mean).map(|(a, b)| a - b).collect();
            normalize(&shifted)
        })
        .collect()
}

/// Samples cluster centres and members, then shuffles the records with the
/// same seeded source. Output is a pure function of `params`.
pub fn generate_labeled_stream(params: &GenerativeParams) -> Result<LabeledStream, GeometryError> {
    if params.num_clusters == 0 {
        return Err(GeometryError::NoClusters);
    }
    let sampler = AngularGaussian::new(params.dimension, params.sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let centers = match params.layout {
        CenterLayout::Uniform => (0..params.num_clusters)
            .map(|_| sample_uniform_sphere(params.dimension, &mut rng))
            .collect::<Result<Vec<_>, _>>()?,
        CenterLayout::Simplex => simplex_centers(params.dimension, params.num_clusters, &mut rng)?,
    };
    let mut records = Vec::with_capacity(params.num_clusters * params.points_per_cluster);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..params.points_per_cluster {
            records.push(LabeledPoint {
                label,
                vector: sampler.sample_point(center, &mut rng)?,
            });
        }
    }
    records.shuffle(&mut rng);
    Ok(LabeledStream {
        params: params.clone(),
        centers,
        records,
    })
}

/// Regenerates with seeds `seed, seed+1, …` until every pair of centres is
/// more than `min_angle` apart.
pub fn generate_separated(
    params: &GenerativeParams,
    min_angle: f64,
    max_attempts: u32,
) -> Result<LabeledStream, GeometryError> {
    let mut best = 0.0_f64;
    for attempt in 0..max_attempts.max(1) {
        let mut p = params.clone();
        p.seed = params.seed.wrapping_add(attempt as u64);
        let stream = generate_labeled_stream(&p)?;
        match stream.min_center_angle() {
            None => return Ok(stream),
            Some(a) if a > min_angle => return Ok(stream),
            Some(a) => best = best.max(a),
        }
    }
    Err(GeometryError::SeparationNotReached {
        required: min_angle,
        attempts: max_attempts.max(1),
        best,
    })
}

/// Monte Carlo estimate of the probability that `clusters` independent uniform
/// centres in dimension `dimension` are pairwise more than `min_angle` apart.
pub fn uniform_separation_probability<R: Rng + ?Sized>(
    dimension: usize,
    clusters: usize,
    min_angle: f64,
    trials: usize,
    rng: &mut R,
) -> Result<f64, GeometryError> {
    if trials == 0 {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for _ in 0..trials {
        let centers = (0..clusters)
            .map(|_| sample_uniform_sphere(dimension, rng))
            .collect::<Result<Vec<_>, _>>()?;
        if min_pairwise_angle(&centers).is_none_or(|a| a > min_angle) {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}
