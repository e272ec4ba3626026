use std::path::{Path, PathBuf};

use clap::Args;
use srdm_core::analysis::scatter_svg;
use srdm_core::{correlation_report, MethodScoreTable};

use super::log;
use crate::error::CliResult;
use crate::inputs::{read_text, write_text};
use crate::manifest::RunManifest;
use crate::Context;

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// CSV with `method,metric,glicko[,backproj]` columns
    pub scores: PathBuf,
    /// Output CSV
    #[arg(long, default_value = "correlation.csv")]
    pub out: PathBuf,
    /// Scatter plot of metric vs Glicko; a metric vs back-projection plot is
    /// written next to it as `<stem>_backproj.svg` when that column is present
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.svg"))
}

pub fn run(ctx: &Context, args: CorrelateArgs) -> CliResult<()> {
    let table = MethodScoreTable::read_csv(read_text(&args.scores)?.as_bytes())?;
    let report = correlation_report(&table)?;
    log("correlate", format!("{} methods", table.rows.len()));

    let plots: Vec<(PathBuf, usize)> = match &args.svg {
        Some(p) => (0..report.summaries.len())
            .map(|i| (if i == 0 { p.clone() } else { sibling(p, "_backproj") }, i))
            .collect(),
        None => Vec::new(),
    };
    let mut manifest = RunManifest::new("correlate", ctx.seed);
    manifest.input(&args.scores).output(&args.out);
    for (p, _) in &plots {
        manifest.output(p);
    }

    write_text(&args.out, &(manifest.csv_comment() + &report.to_csv()?))?;
    for (path, i) in &plots {
        let s = &report.summaries[*i];
        let y_label = if *i == 0 {
            "Glicko rating"
        } else {
            "back-projection RMSE"
        };
        write_text(
            path,
            &scatter_svg(s, "metric", y_label, Some(&manifest.xml_comment_text())),
        )?;
    }
    for s in &report.summaries {
        let flag = if s.degenerate { "  (two points only)" } else { "" };
        println!(
            "{}: r = {:.6}, slope = {:.6}, intercept = {:.6}, n = {}{flag}",
            s.name, s.pearson, s.slope, s.intercept, s.n
        );
    }
    Ok(())
}
