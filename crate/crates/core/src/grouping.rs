//! Partitioning of LR patches into groups, either by clustering the raw
//! r²-dimensional patches or by clustering a scalar projection of them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::imageio::PatchPairSet;

pub const POWER_MAX_ITERS: usize = 1000;
pub const POWER_TOL: f64 = 1e-10;
pub const KMEANS_MAX_ITERS: usize = 100;
/// Convergence threshold on the largest centroid displacement, in intensity units.
pub const KMEANS_TOL: f64 = 1e-4;

const COV_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    /// Cluster raw patch vectors.
    Direct,
    /// Cluster the projection onto the first principal component.
    #[default]
    ProjectedFpc,
    /// Cluster the projection onto the normalized all-ones vector.
    ProjectedOnes,
}

impl GroupingMode {
    pub const ALL: [GroupingMode; 3] = [
        GroupingMode::Direct,
        GroupingMode::ProjectedFpc,
        GroupingMode::ProjectedOnes,
    ];
}

impl fmt::Display for GroupingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupingMode::Direct => "direct",
            GroupingMode::ProjectedFpc => "projected_fpc",
            GroupingMode::ProjectedOnes => "projected_ones",
        })
    }
}

impl FromStr for GroupingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "direct" | "h" => Ok(GroupingMode::Direct),
            "projected_fpc" | "fpc" | "l" => Ok(GroupingMode::ProjectedFpc),
            "projected_ones" | "ones" | "mean" => Ok(GroupingMode::ProjectedOnes),
            other => Err(invalid(format!(
                "unknown grouping mode `{other}` (expected direct, projected_fpc or projected_ones)"
            ))),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 {
        return Err(invalid("point dimension must be positive"));
    }
    if !points.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch(format!(
            "{} coordinates is not a multiple of dimension {dim}",
            points.len()
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("point coordinates"));
    }
    Ok(points.len() / dim)
}

/// Sample covariance (divided by n − 1), dense row-major d×d.
///
/// Partial sums are taken over fixed-size chunks and combined in chunk order,
/// so the result does not depend on the thread count.
pub fn covariance(points: &[f64], dim: usize) -> Result<Vec<f64>> {
    let n = check_points(points, dim)?;
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "covariance needs at least 2 points, got {n}"
        )));
    }
    let mut mean = vec![0.0; dim];
    for p in points.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let partials: Vec<Vec<f64>> = points
        .par_chunks(COV_CHUNK * dim)
        .map(|chunk| {
            let mut acc = vec![0.0; dim * dim];
            let mut centered = vec![0.0; dim];
            for p in chunk.chunks_exact(dim) {
                for ((c, v), m) in centered.iter_mut().zip(p).zip(&mean) {
                    *c = v - m;
                }
                for a in 0..dim {
                    let ca = centered[a];
                    if ca == 0.0 {
                        continue;
                    }
                    let row = &mut acc[a * dim..(a + 1) * dim];
                    for b in a..dim {
                        row[b] += ca * centered[b];
                    }
                }
            }
            acc
        })
        .collect();
    let mut cov = vec![0.0; dim * dim];
    for part in &partials {
        for (c, p) in cov.iter_mut().zip(part) {
            *c += p;
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..dim {
        for b in a..dim {
            let v = cov[a * dim + b] / denom;
            cov[a * dim + b] = v;
            cov[b * dim + a] = v;
        }
    }
    Ok(cov)
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    m.chunks_exact(v.len()).map(|row| dot(row, v)).collect()
}

/// Unit eigenvector of the sample covariance with the largest eigenvalue,
/// by power iteration. The largest-magnitude component is made positive.
pub fn first_principal_component(points: &[f64], dim: usize) -> Result<Vec<f64>> {
    let cov = covariance(points, dim)?;
    let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
    if trace <= 0.0 {
        return Err(Error::Degenerate("all patches are identical (zero covariance)".into()));
    }
    // Start from the covariance column with the largest norm: it cannot be
    // orthogonal to the leading eigenvector unless that eigenvalue is zero.
    let mut v = cov
        .chunks_exact(dim)
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .map(|c| c.to_vec())
        .unwrap_or_default();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    for _ in 0..POWER_MAX_ITERS {
        let mut w = mat_vec(&cov, &v);
        let len = norm(&w);
        if len == 0.0 || !len.is_finite() {
            return Err(Error::Degenerate("power iteration collapsed".into()));
        }
        w.iter_mut().for_each(|x| *x /= len);
        let change = sq_dist(&w, &v).sqrt();
        v = w;
        if change < POWER_TOL {
            break;
        }
    }
    fix_sign(&mut v);
    Ok(v)
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Result of a k-means run over flat d-dimensional points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub dim: usize,
    /// k centroids, row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansFit {
    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest_centroid(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign_all(points: &[f64], centroids: &[f64], dim: usize) -> (Vec<usize>, Vec<f64>) {
    points
        .par_chunks(dim)
        .map(|p| nearest_centroid(p, centroids, dim))
        .unzip()
}

fn kmeans_plus_plus(points: &[f64], dim: usize, n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(point(first));
    let mut d2: Vec<f64> = points.par_chunks(dim).map(|p| sq_dist(p, point(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            rng.gen_range(0..n)
        };
        let c = point(chosen).to_vec();
        d2.par_iter_mut()
            .zip(points.par_chunks(dim))
            .for_each(|(d, p)| *d = d.min(sq_dist(p, &c)));
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Lloyd's k-means with k-means++ seeding from `seed`.
///
/// Stops when no centroid moves by [`KMEANS_TOL`] or more, or after
/// [`KMEANS_MAX_ITERS`] updates. A cluster left empty is moved onto the point
/// farthest from its own centroid.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<KMeansFit> {
    let n = check_points(points, dim)?;
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if k > n {
        return Err(invalid(format!("k = {k} exceeds the number of points ({n})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, dim, n, k, &mut rng);
    let mut history = Vec::new();
    let mut iterations = 0;

    let (mut assignments, mut dists) = assign_all(points, &centroids, dim);
    history.push(dists.iter().sum::<f64>());
    while iterations < KMEANS_MAX_ITERS {
        iterations += 1;
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.chunks_exact(dim).zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut updated = vec![0.0; k * dim];
        for c in 0..k {
            let dst = &mut updated[c * dim..(c + 1) * dim];
            if counts[c] > 0 {
                for (u, s) in dst.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *u = s / counts[c] as f64;
                }
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                dst.copy_from_slice(&points[far * dim..(far + 1) * dim]);
                dists[far] = 0.0;
            }
        }
        let movement = updated
            .chunks_exact(dim)
            .zip(centroids.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        (assignments, dists) = assign_all(points, &centroids, dim);
        history.push(dists.iter().sum::<f64>());
        if movement < KMEANS_TOL {
            break;
        }
    }
    Ok(KMeansFit {
        dim,
        centroids,
        assignments,
        objective_history: history,
        iterations,
    })
}

/// Fitted partition of the LR patch space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingModel {
    pub mode: GroupingMode,
    pub k: usize,
    pub seed: u64,
    pub patch_size: usize,
    /// k centroids; dimension r² for direct, 1 for projected modes.
    pub centroids: Vec<Vec<f64>>,
    /// Unit-norm r²-vector for projected modes.
    pub projection: Option<Vec<f64>>,
    pub objective: f64,
    #[serde(skip)]
    pub assignments: Vec<usize>,
}

impl GroupingModel {
    /// Coordinates the clustering sees for one patch.
    pub fn features(&self, patch: &[u8]) -> Vec<f64> {
        match &self.projection {
            Some(w) => vec![project_for(self.mode, patch, w)],
            None => patch.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Group of an arbitrary patch under this model.
    pub fn assign_patch(&self, patch: &[u8]) -> usize {
        let f = self.features(patch);
        let flat: Vec<f64> = self.centroids.iter().flatten().copied().collect();
        nearest_centroid(&f, &flat, f.len()).0
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn project(patch: &[u8], w: &[f64]) -> f64 {
    patch.iter().zip(w).map(|(&p, &x)| p as f64 * x).sum()
}

/// The all-ones projection is evaluated from the exact integer sum so that it
/// is invariant to pixel order.
fn project_for(mode: GroupingMode, patch: &[u8], w: &[f64]) -> f64 {
    match mode {
        GroupingMode::ProjectedOnes => {
            patch.iter().map(|&v| v as u64).sum::<u64>() as f64 / (patch.len() as f64).sqrt()
        }
        _ => project(patch, w),
    }
}

pub fn ones_projection(dim: usize) -> Vec<f64> {
    vec![1.0 / (dim as f64).sqrt(); dim]
}

/// Fits the grouping on the LR patches of `patchset`. The LR patch is shared
/// by the ground-truth and generated sides, so one partition serves both.
pub fn build_grouping(patchset: &PatchPairSet, mode: GroupingMode, k: usize, seed: u64) -> Result<GroupingModel> {
    let n = patchset.len();
    if n == 0 {
        return Err(Error::Empty("no patches to group".into()));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("cannot form {k} groups from {n} samples")));
    }
    let dim = patchset.dim();
    let raw = || -> Vec<f64> { patchset.patches().flatten().map(|&v| v as f64).collect() };
    let projection = match mode {
        GroupingMode::Direct => None,
        GroupingMode::ProjectedFpc => Some(first_principal_component(&raw(), dim)?),
        GroupingMode::ProjectedOnes => Some(ones_projection(dim)),
    };
    let (features, fdim) = match &projection {
        Some(w) => (
            patchset
                .patches()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|p| project_for(mode, p, w))
                .collect(),
            1,
        ),
        None => (raw(), dim),
    };
    let fit = kmeans(&features, fdim, k, seed)?;
    Ok(GroupingModel {
        mode,
        k,
        seed,
        patch_size: patchset.patch_size(),
        centroids: fit.centroids.chunks_exact(fdim).map(|c| c.to_vec()).collect(),
        projection,
        objective: fit.objective(),
        assignments: fit.assignments,
    })
}
