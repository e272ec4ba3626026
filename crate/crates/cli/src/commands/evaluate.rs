use std::path::PathBuf;

use clap::Args;
use srdm_core::{compute_metric, compute_metric_per_image};

use super::{csv_err, csv_to_string, log};
use crate::error::{CliError, CliResult};
use crate::inputs::{load_triples, write_text};
use crate::manifest::RunManifest;
use crate::settings::MetricArgs;
use crate::Context;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of LR inputs
    pub lr_dir: PathBuf,
    /// Directory of ground-truth HR images
    pub hr_dir: PathBuf,
    /// Directory of generated HR images
    pub sr_dir: PathBuf,
    /// Where to write `<name>.json` and `<name>.csv`
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Base name of the report files
    #[arg(long, default_value = "report")]
    pub name: String,
    /// Also score every image on its own grouping (`<name>_per_image.csv`)
    #[arg(long)]
    pub per_image: bool,
    #[command(flatten)]
    pub metric: MetricArgs,
}

pub fn run(ctx: &Context, args: EvaluateArgs) -> CliResult<()> {
    let config = args.metric.resolve(&ctx.file, ctx.seed)?;
    let (stems, triples) = load_triples(&args.lr_dir, &args.hr_dir, &args.sr_dir)?;
    log("evaluate", format!("loaded {} image triples", triples.len()));

    let json_path = args.out_dir.join(format!("{}.json", args.name));
    let csv_path = args.out_dir.join(format!("{}.csv", args.name));
    let per_image_path = args.out_dir.join(format!("{}_per_image.csv", args.name));
    let mut manifest = RunManifest::new("evaluate", ctx.seed);
    manifest.config = Some(config.clone());
    manifest
        .input(&args.lr_dir)
        .input(&args.hr_dir)
        .input(&args.sr_dir)
        .output(&json_path)
        .output(&csv_path);
    if args.per_image {
        manifest.output(&per_image_path);
    }

    let report = compute_metric(&triples, &config)?;
    log(
        "evaluate",
        format!(
            "{} samples in {} groups ({} dropped)",
            report.total_samples, report.n_groups, report.dropped_groups
        ),
    );

    let doc = serde_json::json!({ "manifest": manifest.to_json_value(), "report": report });
    let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::internal(e.to_string()))?;
    write_text(&json_path, &(json + "\n"))?;
    let csv = format!(
        "{}# aggregate: {}\n{}",
        manifest.csv_comment(),
        report.aggregate,
        report.to_csv()?
    );
    write_text(&csv_path, &csv)?;

    if args.per_image {
        let reports = compute_metric_per_image(&triples, &config)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["image", "aggregate", "n_groups", "dropped_groups", "samples"])
            .map_err(csv_err)?;
        for (stem, r) in stems.iter().zip(&reports) {
            w.write_record([
                stem.clone(),
                r.aggregate.to_string(),
                r.n_groups.to_string(),
                r.dropped_groups.to_string(),
                r.total_samples.to_string(),
            ])
            .map_err(csv_err)?;
        }
        write_text(&per_image_path, &(manifest.csv_comment() + &csv_to_string(w)?))?;
    }

    println!("aggregate {:?}", report.aggregate);
    Ok(())
}
