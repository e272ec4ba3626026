//! 256-bin intensity histograms, distances between them, and the sorted-sample
//! sliced Wasserstein-2 loss with its gradient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const BINS: usize = 256;

/// Additive smoothing applied to every bin before KL/JS.
pub const SMOOTHING_EPS: f64 = 1e-10;

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram256 {
    #[serde(with = "counts_serde")]
    counts: [u64; BINS],
    total: u64,
}

mod counts_serde {
    use super::BINS;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(counts: &[u64; BINS], s: S) -> Result<S::Ok, S::Error> {
        counts.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u64; BINS], D::Error> {
        let v = Vec::<u64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<u64>| serde::de::Error::invalid_length(v.len(), &"256 bins"))
    }
}

impl fmt::Debug for Histogram256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero: Vec<(usize, u64)> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
            .collect();
        f.debug_struct("Histogram256")
            .field("total", &self.total)
            .field("nonzero", &nonzero)
            .finish()
    }
}

impl Default for Histogram256 {
    fn default() -> Self {
        Self {
            counts: [0; BINS],
            total: 0,
        }
    }
}

impl Histogram256 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: [u64; BINS]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    #[inline]
    pub fn add(&mut self, value: u8) {
        self.counts[value as usize] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram256) {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn counts(&self) -> &[u64; BINS] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn pmf(&self) -> Result<[f64; BINS]> {
        require_nonempty(self)?;
        let t = self.total as f64;
        let mut p = [0.0; BINS];
        for (pi, &c) in p.iter_mut().zip(self.counts.iter()) {
            *pi = c as f64 / t;
        }
        Ok(p)
    }
}

impl FromIterator<u8> for Histogram256 {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut h = Histogram256::new();
        for v in iter {
            h.add(v);
        }
        h
    }
}

/// Histogram of intensities given on a wider integer type; values must lie in [0, 255].
pub fn histogram<T>(values: &[T]) -> Result<Histogram256>
where
    T: Copy + TryInto<u8> + fmt::Display,
{
    if values.is_empty() {
        return Err(Error::Empty("histogram of no values".into()));
    }
    let mut h = Histogram256::new();
    for &v in values {
        let b: u8 = v
            .try_into()
            .map_err(|_| invalid(format!("intensity {v} outside [0, 255]")))?;
        h.add(b);
    }
    Ok(h)
}

fn require_nonempty(h: &Histogram256) -> Result<()> {
    if h.total == 0 {
        Err(Error::Empty("histogram has no mass".into()))
    } else {
        Ok(())
    }
}

/// Wasserstein-1 in intensity units: Σ_k |CDF_a(k) − CDF_b(k)|.
///
/// Evaluated on cross-multiplied integer cumulative counts so identical
/// distributions give exactly zero and integer transports give integers.
pub fn w1_distance(a: &Histogram256, b: &Histogram256) -> Result<f64> {
    require_nonempty(a)?;
    require_nonempty(b)?;
    let (ta, tb) = (a.total as u128, b.total as u128);
    let (mut ca, mut cb) = (0u128, 0u128);
    let mut acc = 0u128;
    for k in 0..BINS - 1 {
        ca += a.counts[k] as u128;
        cb += b.counts[k] as u128;
        acc += (ca * tb).abs_diff(cb * ta);
    }
    Ok(ratio(acc, ta * tb))
}

/// Total variation: ½ Σ |p − q|, in [0, 1].
pub fn tv_distance(a: &Histogram256, b: &Histogram256) -> Result<f64> {
    require_nonempty(a)?;
    require_nonempty(b)?;
    let (ta, tb) = (a.total as u128, b.total as u128);
    let acc: u128 = a
        .counts
        .iter()
        .zip(b.counts.iter())
        .map(|(&x, &y)| (x as u128 * tb).abs_diff(y as u128 * ta))
        .sum();
    Ok(ratio(acc, 2 * ta * tb))
}

/// Exact-as-possible `num / den` for large integers.
fn ratio(num: u128, den: u128) -> f64 {
    let whole = num / den;
    let rem = num % den;
    whole as f64 + rem as f64 / den as f64
}

fn smoothed_pmf(h: &Histogram256) -> Result<[f64; BINS]> {
    let mut p = h.pmf()?;
    let norm = 1.0 + BINS as f64 * SMOOTHING_EPS;
    for v in &mut p {
        *v = (*v + SMOOTHING_EPS) / norm;
    }
    Ok(p)
}

fn kl_pmf(p: &[f64; BINS], q: &[f64; BINS]) -> f64 {
    p.iter()
        .zip(q.iter())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

/// KL(a ‖ b) in nats on ε-smoothed pmfs.
pub fn kl_divergence(a: &Histogram256, b: &Histogram256) -> Result<f64> {
    let p = smoothed_pmf(a)?;
    let q = smoothed_pmf(b)?;
    Ok(kl_pmf(&p, &q))
}

/// Jensen-Shannon divergence in nats on ε-smoothed pmfs; at most ln 2.
pub fn js_divergence(a: &Histogram256, b: &Histogram256) -> Result<f64> {
    let p = smoothed_pmf(a)?;
    let q = smoothed_pmf(b)?;
    let mut m = [0.0; BINS];
    for i in 0..BINS {
        m[i] = 0.5 * (p[i] + q[i]);
    }
    Ok(0.5 * kl_pmf(&p, &m) + 0.5 * kl_pmf(&q, &m))
}

/// Distribution distance used per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    Wasserstein,
    Tv,
    Js,
    Kl,
}

impl Distance {
    pub const ALL: [Distance; 4] = [Distance::Wasserstein, Distance::Tv, Distance::Js, Distance::Kl];

    /// `self(generated, ground_truth)`; argument order only matters for KL.
    pub fn eval(self, generated: &Histogram256, ground_truth: &Histogram256) -> Result<f64> {
        match self {
            Distance::Wasserstein => w1_distance(generated, ground_truth),
            Distance::Tv => tv_distance(generated, ground_truth),
            Distance::Js => js_divergence(generated, ground_truth),
            Distance::Kl => kl_divergence(generated, ground_truth),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Wasserstein => "wasserstein",
            Distance::Tv => "tv",
            Distance::Js => "js",
            Distance::Kl => "kl",
        })
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wasserstein" | "w1" | "emd" => Ok(Distance::Wasserstein),
            "tv" => Ok(Distance::Tv),
            "js" => Ok(Distance::Js),
            "kl" => Ok(Distance::Kl),
            other => Err(invalid(format!(
                "unknown distance `{other}` (expected wasserstein, tv, js or kl)"
            ))),
        }
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Resamples an ascending sequence to `len` points by linear interpolation
/// of its empirical quantile function.
pub fn resample_quantiles(sorted_values: &[f64], len: usize) -> Result<Vec<f64>> {
    let m = sorted_values.len();
    if m == 0 {
        return Err(Error::Empty("cannot resample an empty list".into()));
    }
    if len == m {
        return Ok(sorted_values.to_vec());
    }
    if len == 1 || m == 1 {
        // Single target point takes the median position; a single source point is constant.
        let pos = if m == 1 { 0.0 } else { (m - 1) as f64 / 2.0 };
        return Ok(vec![interp(sorted_values, pos); len]);
    }
    let step = (m - 1) as f64 / (len - 1) as f64;
    Ok((0..len).map(|i| interp(sorted_values, i as f64 * step)).collect())
}

fn interp(v: &[f64], pos: f64) -> f64 {
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let t = pos - lo as f64;
    v[lo] + t * (v[hi] - v[lo])
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("sliced Wasserstein input"))
    }
}

/// Sorted-sample sliced Wasserstein-2 (squared): Σᵢ (gen₍ᵢ₎ − gt₍ᵢ₎)².
/// The shorter list is quantile-resampled to the longer length.
pub fn sliced_w2(gen: &[f64], gt: &[f64]) -> Result<f64> {
    if gen.is_empty() || gt.is_empty() {
        return Err(Error::Empty("sliced Wasserstein needs non-empty lists".into()));
    }
    check_finite(gen)?;
    check_finite(gt)?;
    let mut a = sorted(gen);
    let mut b = sorted(gt);
    if a.len() < b.len() {
        a = resample_quantiles(&a, b.len())?;
    } else if b.len() < a.len() {
        b = resample_quantiles(&b, a.len())?;
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Gradient of [`sliced_w2`] with respect to `gen`, for equal-length inputs.
/// Each element receives 2·(gen[i] − gt value at its sorted rank); ties keep
/// original index order.
pub fn sliced_w2_grad(gen: &[f64], gt: &[f64]) -> Result<Vec<f64>> {
    if gen.is_empty() || gt.is_empty() {
        return Err(Error::Empty("sliced Wasserstein needs non-empty lists".into()));
    }
    if gen.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "gradient needs equal lengths, got {} generated vs {} ground truth; resample the ground truth first",
            gen.len(),
            gt.len()
        )));
    }
    check_finite(gen)?;
    check_finite(gt)?;
    let mut order: Vec<usize> = (0..gen.len()).collect();
    order.sort_by(|&i, &j| gen[i].total_cmp(&gen[j]));
    let target = sorted(gt);
    let mut grad = vec![0.0; gen.len()];
    for (rank, &i) in order.iter().enumerate() {
        grad[i] = 2.0 * (gen[i] - target[rank]);
    }
    Ok(grad)
}
