use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use srdm_core::{back_projection_error, Kernel};

use super::{csv_err, csv_to_string, log};
use crate::error::CliResult;
use crate::inputs::{load_matched, match_stems, write_text};
use crate::manifest::RunManifest;
use crate::Context;

#[derive(Debug, Args)]
pub struct BackprojectArgs {
    /// Directory of SR outputs
    pub sr_dir: PathBuf,
    /// Directory of the LR inputs they were produced from
    pub lr_dir: PathBuf,
    /// Upscaling factor [default: 4]
    #[arg(long)]
    pub scale: Option<usize>,
    /// Downsampling kernel, box or bicubic [default: bicubic]
    #[arg(long)]
    pub kernel: Option<Kernel>,
    /// Output CSV
    #[arg(long, default_value = "backproject.csv")]
    pub out: PathBuf,
}

pub fn run(ctx: &Context, args: BackprojectArgs) -> CliResult<()> {
    let scale = ctx.file.pick(args.scale, "scale", 4)?;
    let kernel = ctx.file.pick(args.kernel, "kernel", Kernel::default())?;
    let matched = match_stems(&[("sr_dir", &args.sr_dir), ("lr_dir", &args.lr_dir)])?;
    let images = load_matched(&matched)?;
    log("backproject", format!("loaded {} image pairs", images.len()));

    let errors: Vec<f64> = images
        .par_iter()
        .map(|pair| back_projection_error(&pair[0], &pair[1], scale, kernel))
        .collect::<srdm_core::Result<_>>()?;
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;

    let mut manifest = RunManifest::new("backproject", ctx.seed);
    manifest
        .param("scale", scale)
        .param("kernel", kernel)
        .input(&args.sr_dir)
        .input(&args.lr_dir)
        .output(&args.out);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["image", "rmse"]).map_err(csv_err)?;
    for ((stem, _), e) in matched.iter().zip(&errors) {
        w.write_record([stem.clone(), e.to_string()]).map_err(csv_err)?;
    }
    w.write_record(["mean".to_string(), mean.to_string()])
        .map_err(csv_err)?;
    write_text(&args.out, &(manifest.csv_comment() + &csv_to_string(w)?))?;
    println!("mean_rmse {mean:?}");
    Ok(())
}
