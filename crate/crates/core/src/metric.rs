//! The grouped, projected distribution metric and its companions: the
//! per-instance reference metric, subsampled-group statistics, and the
//! back-projection fidelity error.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distributions::{Distance, Histogram256};
use crate::error::{invalid, Error, Result};
use crate::grouping::{build_grouping, GroupingMode, GroupingModel};
use crate::imageio::{
    downsample, extract_dataset, GrayImage, ImageTriple, Kernel, PatchGeometry, PatchPairSet, PixelChoice,
};

/// Samples per group targeted by automatic group-count selection.
pub const AUTO_SAMPLES_PER_GROUP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupCount {
    /// `max(1, ⌊samples / 1000⌋)`.
    #[default]
    Auto,
    Fixed(usize),
}

impl GroupCount {
    pub fn resolve(self, total_samples: usize) -> usize {
        match self {
            GroupCount::Auto => (total_samples / AUTO_SAMPLES_PER_GROUP).max(1),
            GroupCount::Fixed(k) => k,
        }
    }
}

impl fmt::Display for GroupCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupCount::Auto => f.write_str("auto"),
            GroupCount::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for GroupCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GroupCount::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(GroupCount::Fixed(k)),
            _ => Err(invalid(format!(
                "group count must be `auto` or a positive integer, got `{s}`"
            ))),
        }
    }
}

macro_rules! serde_via_string {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_string!(GroupCount);
serde_via_string!(PixelChoice);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub scale: usize,
    pub patch_size: usize,
    /// Window stride in LR pixels; `None` means equal to the scale.
    pub stride: Option<usize>,
    pub n_groups: GroupCount,
    pub min_group_samples: usize,
    pub distance: Distance,
    pub grouping_mode: GroupingMode,
    pub pixel: PixelChoice,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            scale: 4,
            patch_size: 13,
            stride: None,
            n_groups: GroupCount::Auto,
            min_group_samples: 50,
            distance: Distance::Wasserstein,
            grouping_mode: GroupingMode::ProjectedFpc,
            pixel: PixelChoice::Center,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 || self.patch_size.is_multiple_of(2) {
            return Err(invalid(format!(
                "patch size must be odd and >= 3, got {}",
                self.patch_size
            )));
        }
        if self.scale < 2 {
            return Err(invalid(format!("scale must be >= 2, got {}", self.scale)));
        }
        if self.stride == Some(0) {
            return Err(invalid("stride must be >= 1"));
        }
        if self.min_group_samples < 1 {
            return Err(invalid("min_group_samples must be >= 1"));
        }
        if self.n_groups == GroupCount::Fixed(0) {
            return Err(invalid("number of groups must be >= 1"));
        }
        self.geometry().validate()
    }

    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.scale)
    }

    pub fn geometry(&self) -> PatchGeometry {
        PatchGeometry {
            patch_size: self.patch_size,
            scale: self.scale,
            stride: self.stride(),
            offset: self.pixel.resolve(self.scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistance {
    pub group: usize,
    pub gt_count: u64,
    pub gen_count: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Unweighted mean of `per_group` distances.
    pub aggregate: f64,
    /// Surviving groups in ascending group index.
    pub per_group: Vec<GroupDistance>,
    pub dropped_groups: usize,
    pub n_groups: usize,
    pub total_samples: usize,
    pub config: MetricConfig,
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per surviving group: `group,gt_count,gen_count,distance`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "gt_count", "gen_count", "distance"])?;
        for g in &self.per_group {
            w.write_record([
                g.group.to_string(),
                g.gt_count.to_string(),
                g.gen_count.to_string(),
                g.distance.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Per-group histograms of the ground-truth and generated values.
fn group_histograms(pairs: &PatchPairSet, assignments: &[usize], k: usize) -> Vec<(Histogram256, Histogram256)> {
    let mut hists = vec![(Histogram256::new(), Histogram256::new()); k];
    for ((&g, &gt), &gen) in assignments.iter().zip(pairs.gt_values()).zip(pairs.gen_values()) {
        hists[g].0.add(gt);
        hists[g].1.add(gen);
    }
    hists
}

fn aggregate_groups(
    hists: &[(Histogram256, Histogram256)],
    distance: Distance,
    min_samples: u64,
) -> Result<(Vec<GroupDistance>, usize)> {
    let per_group: Vec<GroupDistance> = hists
        .par_iter()
        .enumerate()
        .filter(|(_, (gt, gen))| gt.total() >= min_samples && gen.total() >= min_samples)
        .map(|(group, (gt, gen))| {
            Ok(GroupDistance {
                group,
                gt_count: gt.total(),
                gen_count: gen.total(),
                distance: distance.eval(gen, gt)?,
            })
        })
        .collect::<Result<_>>()?;
    let dropped = hists.len() - per_group.len();
    Ok((per_group, dropped))
}

fn mean_distance(per_group: &[GroupDistance]) -> f64 {
    per_group.iter().map(|g| g.distance).sum::<f64>() / per_group.len() as f64
}

/// Metric over an already-fitted grouping (assignments aligned with `pairs`).
pub fn compute_metric_with_grouping(
    pairs: &PatchPairSet,
    assignments: &[usize],
    n_groups: usize,
    config: &MetricConfig,
) -> Result<MetricReport> {
    if assignments.len() != pairs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments for {} samples",
            assignments.len(),
            pairs.len()
        )));
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= n_groups) {
        return Err(invalid(format!("group index {bad} out of range for {n_groups} groups")));
    }
    let hists = group_histograms(pairs, assignments, n_groups);
    let (per_group, dropped_groups) = aggregate_groups(&hists, config.distance, config.min_group_samples as u64)?;
    if per_group.is_empty() {
        return Err(Error::Empty(format!(
            "all {n_groups} groups have fewer than {} samples",
            config.min_group_samples
        )));
    }
    Ok(MetricReport {
        aggregate: mean_distance(&per_group),
        per_group,
        dropped_groups,
        n_groups,
        total_samples: pairs.len(),
        config: config.clone(),
    })
}

/// Groups `pairs` according to `config` and evaluates the metric.
pub fn compute_metric_on_pairs(pairs: &PatchPairSet, config: &MetricConfig) -> Result<(MetricReport, GroupingModel)> {
    if pairs.is_empty() {
        return Err(Error::Empty("no patches could be extracted".into()));
    }
    let k = config.n_groups.resolve(pairs.len());
    let model = build_grouping(pairs, config.grouping_mode, k, config.seed)?;
    let report = compute_metric_with_grouping(pairs, &model.assignments, k, config)?;
    Ok((report, model))
}

/// Extracts patch pairs from every triple, groups the LR patches, and averages
/// the per-group distance between generated and ground-truth HR value
/// distributions. All images are pooled into one grouping.
pub fn compute_metric(dataset: &[ImageTriple], config: &MetricConfig) -> Result<MetricReport> {
    config.validate()?;
    let pairs = extract_dataset(dataset, &config.geometry())?.canonical_order();
    Ok(compute_metric_on_pairs(&pairs, config)?.0)
}

/// Evaluates each triple on its own grouping.
pub fn compute_metric_per_image(dataset: &[ImageTriple], config: &MetricConfig) -> Result<Vec<MetricReport>> {
    config.validate()?;
    dataset
        .iter()
        .map(|t| compute_metric(std::slice::from_ref(t), config))
        .collect()
}

/// Many HR draws for one exact LR key.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSamples {
    pub key: String,
    pub gt_values: Vec<u8>,
    pub gen_values: Vec<u8>,
}

/// Mean over keys of the distance between the generated and ground-truth
/// conditionals. Only meaningful when each key has many draws.
pub fn compute_instance_metric(samples: &[InstanceSamples], distance: Distance) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no keys".into()));
    }
    let mut total = 0.0;
    for s in samples {
        if s.gt_values.is_empty() || s.gen_values.is_empty() {
            return Err(Error::Empty(format!("key `{}` has no samples", s.key)));
        }
        let gt: Histogram256 = s.gt_values.iter().copied().collect();
        let gen: Histogram256 = s.gen_values.iter().copied().collect();
        total += distance.eval(&gen, &gt)?;
    }
    Ok(total / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleStats {
    pub mean: f64,
    /// Population variance over repetitions.
    pub variance: f64,
    pub repetitions: usize,
    /// Aggregate of each repetition, in repetition order.
    pub values: Vec<f64>,
}

/// Repeatedly draws `n_per_group` samples without replacement from every group
/// that has at least that many, and reports mean and variance of the
/// resulting aggregate. Ground-truth and generated values are drawn at the
/// same sample indices.
pub fn subsample_on_grouping(
    pairs: &PatchPairSet,
    assignments: &[usize],
    n_groups: usize,
    distance: Distance,
    n_per_group: usize,
    repetitions: usize,
    seed: u64,
) -> Result<SubsampleStats> {
    if repetitions == 0 {
        return Err(invalid("repetitions must be >= 1"));
    }
    if n_per_group == 0 {
        return Err(invalid("samples per group must be >= 1"));
    }
    if assignments.len() != pairs.len() {
        return Err(Error::DimensionMismatch("assignments do not match samples".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for (i, &g) in assignments.iter().enumerate() {
        members
            .get_mut(g)
            .ok_or_else(|| invalid(format!("group index {g} out of range")))?
            .push(i);
    }
    let eligible: Vec<&Vec<usize>> = members.iter().filter(|m| m.len() >= n_per_group).collect();
    if eligible.is_empty() {
        return Err(Error::Empty(format!("no group has {n_per_group} samples")));
    }
    let (gt, gen) = (pairs.gt_values(), pairs.gen_values());
    let values: Vec<f64> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let mut total = 0.0;
            for group in &eligible {
                let picked = sample(&mut rng, group.len(), n_per_group);
                let mut hg = Histogram256::new();
                let mut hs = Histogram256::new();
                for j in picked.iter() {
                    let i = group[j];
                    hg.add(gt[i]);
                    hs.add(gen[i]);
                }
                total += distance.eval(&hs, &hg)?;
            }
            Ok(total / eligible.len() as f64)
        })
        .collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / repetitions as f64;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / repetitions as f64;
    Ok(SubsampleStats {
        mean,
        variance,
        repetitions,
        values,
    })
}

/// Subsampled-group experiment over a dataset, using the grouping fitted by
/// `config`.
pub fn metric_with_subsampling(
    dataset: &[ImageTriple],
    config: &MetricConfig,
    n_per_group: usize,
    repetitions: usize,
    seed: u64,
) -> Result<SubsampleStats> {
    config.validate()?;
    let pairs = extract_dataset(dataset, &config.geometry())?.canonical_order();
    if pairs.is_empty() {
        return Err(Error::Empty("no patches could be extracted".into()));
    }
    let k = config.n_groups.resolve(pairs.len());
    let model = build_grouping(&pairs, config.grouping_mode, k, config.seed)?;
    subsample_on_grouping(
        &pairs,
        &model.assignments,
        k,
        config.distance,
        n_per_group,
        repetitions,
        seed,
    )
}

/// Root-mean-square error between `downsample(sr)` and `lr` on the 0–255 scale.
pub fn back_projection_error(sr: &GrayImage, lr: &GrayImage, scale: usize, kernel: Kernel) -> Result<f64> {
    if sr.width() != lr.width() * scale || sr.height() != lr.height() * scale {
        return Err(Error::DimensionMismatch(format!(
            "SR {}x{} is not {scale}x the LR {}x{}",
            sr.width(),
            sr.height(),
            lr.width(),
            lr.height()
        )));
    }
    let down = downsample(sr, scale, kernel)?;
    let sse: u64 = down
        .data()
        .iter()
        .zip(lr.data())
        .map(|(&a, &b)| {
            let d = a.abs_diff(b) as u64;
            d * d
        })
        .sum();
    Ok((sse as f64 / lr.data().len() as f64).sqrt())
}
