//! `--config` files and their merge with command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use clap::Args;
use srdm_core::{Distance, GroupCount, GroupingMode, MetricConfig, PixelChoice};

use crate::error::{CliError, CliResult};

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "scale",
    "patch_size",
    "stride",
    "n_groups",
    "min_group_samples",
    "distance",
    "grouping",
    "pixel",
    "kernel",
    "shuffles",
    "repetitions",
];

/// `key = value` pairs read from a config file. Keys accept `-` or `_`.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::input(format!("line {}: unknown key `{key}`", n + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T>(&self, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::input(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    /// The flag if given, else the file value, else `default`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }
}

/// Flags shared by every subcommand that computes the metric.
#[derive(Debug, Clone, Default, Args)]
pub struct MetricArgs {
    /// Upscaling factor between LR and HR images [default: 4]
    #[arg(long)]
    pub scale: Option<usize>,
    /// Odd LR patch side used for grouping [default: 13]
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Window stride in LR pixels [default: the scale]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Number of groups, or `auto` for one per 1000 samples [default: auto]
    #[arg(long)]
    pub n_groups: Option<GroupCount>,
    /// Groups with fewer samples on either side are dropped [default: 50]
    #[arg(long)]
    pub min_group_samples: Option<usize>,
    /// wasserstein, tv, js or kl [default: wasserstein]
    #[arg(long)]
    pub distance: Option<Distance>,
    /// direct, projected_fpc or projected_ones [default: projected_fpc]
    #[arg(long)]
    pub grouping: Option<GroupingMode>,
    /// HR pixel under the patch center: center, top-left, bottom-right or `row,col` [default: center]
    #[arg(long)]
    pub pixel: Option<PixelChoice>,
}

impl MetricArgs {
    pub fn resolve(&self, file: &FileConfig, seed: u64) -> CliResult<MetricConfig> {
        let d = MetricConfig::default();
        let stride = match self.stride {
            Some(s) => Some(s),
            None => file.get("stride")?,
        };
        let config = MetricConfig {
            scale: file.pick(self.scale, "scale", d.scale)?,
            patch_size: file.pick(self.patch_size, "patch_size", d.patch_size)?,
            stride,
            n_groups: file.pick(self.n_groups, "n_groups", d.n_groups)?,
            min_group_samples: file.pick(self.min_group_samples, "min_group_samples", d.min_group_samples)?,
            distance: file.pick(self.distance, "distance", d.distance)?,
            grouping_mode: file.pick(self.grouping, "grouping", d.grouping_mode)?,
            pixel: file.pick(self.pixel, "pixel", d.pixel)?,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}
