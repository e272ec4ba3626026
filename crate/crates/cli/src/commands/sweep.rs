use std::path::PathBuf;

use clap::{Args, ValueEnum};
use srdm_core::metric::subsample_on_grouping;
use srdm_core::{build_grouping, compute_metric, extract_dataset, MetricConfig};

use super::{csv_err, csv_to_string, log};
use crate::error::{CliError, CliResult};
use crate::inputs::{load_triples, write_text};
use crate::manifest::RunManifest;
use crate::settings::MetricArgs;
use crate::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    /// LR patch size
    R,
    /// Number of groups
    Ngroups,
    /// HR pixel choice
    Pixel,
    /// Distribution distance
    Distance,
    /// Samples drawn per group, with repeated subsampling
    Nsamples,
    /// Grouping space
    Grouping,
}

impl Param {
    fn name(self) -> &'static str {
        match self {
            Param::R => "r",
            Param::Ngroups => "ngroups",
            Param::Pixel => "pixel",
            Param::Distance => "distance",
            Param::Nsamples => "nsamples",
            Param::Grouping => "grouping",
        }
    }

    fn default_values(self) -> Vec<String> {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        match self {
            Param::R => (13..=35).step_by(2).map(|r: usize| r.to_string()).collect(),
            Param::Ngroups => owned(&["50", "100", "200", "500", "1000"]),
            Param::Pixel => owned(&["center", "top-left", "bottom-right"]),
            Param::Distance => owned(&["wasserstein", "tv", "js"]),
            Param::Nsamples => owned(&["500", "1000", "2000", "3000"]),
            Param::Grouping => owned(&["direct", "projected_fpc", "projected_ones"]),
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub lr_dir: PathBuf,
    pub hr_dir: PathBuf,
    pub sr_dir: PathBuf,
    /// Parameter to vary; the others come from the metric flags
    #[arg(long, value_enum)]
    pub vary: Param,
    /// Comma-separated values instead of the default range
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<String>>,
    /// Subsampling repetitions for `--vary nsamples` [default: 100]
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Output CSV
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    #[command(flatten)]
    pub metric: MetricArgs,
}

struct Row {
    aggregate: f64,
    variance: Option<f64>,
    groups: usize,
    dropped: Option<usize>,
}

fn with_value(base: &MetricConfig, param: Param, value: &str) -> CliResult<MetricConfig> {
    let bad = |e: srdm_core::Error| CliError::input(format!("--vary {}: {e}", param.name()));
    let mut c = base.clone();
    match param {
        Param::R => {
            c.patch_size = value
                .parse()
                .map_err(|_| CliError::input(format!("patch size `{value}` is not an integer")))?
        }
        Param::Ngroups => c.n_groups = value.parse().map_err(bad)?,
        Param::Pixel => c.pixel = value.parse().map_err(bad)?,
        Param::Distance => c.distance = value.parse().map_err(bad)?,
        Param::Grouping => c.grouping_mode = value.parse().map_err(bad)?,
        Param::Nsamples => {}
    }
    Ok(c)
}

pub fn run(ctx: &Context, args: SweepArgs) -> CliResult<()> {
    let base = args.metric.resolve(&ctx.file, ctx.seed)?;
    let repetitions = ctx.file.pick(args.repetitions, "repetitions", 100)?;
    let values = args.values.clone().unwrap_or_else(|| args.vary.default_values());
    if values.is_empty() {
        return Err(CliError::input("no values to sweep"));
    }
    // Parse everything up front so a typo fails before any work is done.
    let configs: Vec<MetricConfig> = values
        .iter()
        .map(|v| with_value(&base, args.vary, v))
        .collect::<CliResult<_>>()?;
    let n_samples: Vec<usize> = if args.vary == Param::Nsamples {
        values
            .iter()
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::input(format!("sample count `{v}` is not an integer")))
            })
            .collect::<CliResult<_>>()?
    } else {
        Vec::new()
    };

    let (_, triples) = load_triples(&args.lr_dir, &args.hr_dir, &args.sr_dir)?;
    log("sweep", format!("loaded {} image triples", triples.len()));

    let rows: Vec<Result<Row, String>> = if args.vary == Param::Nsamples {
        base.validate()?;
        let pairs = extract_dataset(&triples, &base.geometry())?.canonical_order();
        if pairs.is_empty() {
            return Err(CliError::input("no patches could be extracted"));
        }
        let k = base.n_groups.resolve(pairs.len());
        let model = build_grouping(&pairs, base.grouping_mode, k, base.seed)?;
        n_samples
            .iter()
            .map(|&n| {
                log("sweep", format!("nsamples = {n}"));
                subsample_on_grouping(&pairs, &model.assignments, k, base.distance, n, repetitions, ctx.seed)
                    .map(|s| Row {
                        aggregate: s.mean,
                        variance: Some(s.variance),
                        groups: k,
                        dropped: None,
                    })
                    .map_err(|e| e.to_string())
            })
            .collect()
    } else {
        values
            .iter()
            .zip(&configs)
            .map(|(v, c)| {
                log("sweep", format!("{} = {v}", args.vary.name()));
                compute_metric(&triples, c)
                    .map(|r| Row {
                        aggregate: r.aggregate,
                        variance: None,
                        groups: r.n_groups,
                        dropped: Some(r.dropped_groups),
                    })
                    .map_err(|e| e.to_string())
            })
            .collect()
    };

    let mut manifest = RunManifest::new("sweep", ctx.seed);
    manifest.config = Some(base);
    manifest
        .param("vary", args.vary.name())
        .param("values", values.join(","))
        .input(&args.lr_dir)
        .input(&args.hr_dir)
        .input(&args.sr_dir)
        .output(&args.out);
    if args.vary == Param::Nsamples {
        manifest.param("repetitions", repetitions);
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "parameter",
        "value",
        "aggregate",
        "variance",
        "groups",
        "dropped_groups",
        "status",
    ])
    .map_err(csv_err)?;
    let mut failures = 0;
    for (v, row) in values.iter().zip(&rows) {
        let record = match row {
            Ok(r) => [
                args.vary.name().to_string(),
                v.clone(),
                r.aggregate.to_string(),
                r.variance.map(|x| x.to_string()).unwrap_or_default(),
                r.groups.to_string(),
                r.dropped.map(|x| x.to_string()).unwrap_or_default(),
                "ok".to_string(),
            ],
            Err(msg) => {
                failures += 1;
                [
                    args.vary.name().to_string(),
                    v.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("error: {msg}"),
                ]
            }
        };
        w.write_record(&record).map_err(csv_err)?;
    }
    write_text(&args.out, &(manifest.csv_comment() + &csv_to_string(w)?))?;
    for (v, row) in values.iter().zip(&rows) {
        match row {
            Ok(r) => println!("{} = {v}: {:?}", args.vary.name(), r.aggregate),
            Err(msg) => println!("{} = {v}: error: {msg}", args.vary.name()),
        }
    }
    if failures == rows.len() {
        return Err(CliError::input("every sweep value failed"));
    }
    Ok(())
}
