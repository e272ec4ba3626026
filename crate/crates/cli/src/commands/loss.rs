use std::path::PathBuf;

use clap::Args;
use srdm_core::{sliced_w2, sliced_w2_grad};

use super::{csv_err, csv_to_string};
use crate::error::CliResult;
use crate::inputs::{read_numbers, write_text};
use crate::manifest::RunManifest;
use crate::Context;

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Generated samples, one or more numbers per line
    pub gen: PathBuf,
    /// Ground-truth samples
    pub gt: PathBuf,
    /// Write the gradient with respect to the generated samples here
    /// (requires equal lengths)
    #[arg(long)]
    pub grad: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: LossArgs) -> CliResult<()> {
    let gen = read_numbers(&args.gen)?;
    let gt = read_numbers(&args.gt)?;
    let value = sliced_w2(&gen, &gt)?;
    if let Some(path) = &args.grad {
        let grad = sliced_w2_grad(&gen, &gt)?;
        let mut manifest = RunManifest::new("loss", ctx.seed);
        manifest.input(&args.gen).input(&args.gt).output(path);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "gen", "grad"]).map_err(csv_err)?;
        for (i, (x, g)) in gen.iter().zip(&grad).enumerate() {
            w.write_record([i.to_string(), x.to_string(), g.to_string()])
                .map_err(csv_err)?;
        }
        write_text(
            path,
            &(manifest.csv_comment() + &format!("# loss: {value}\n") + &csv_to_string(w)?),
        )?;
    }
    println!("loss {value:?}");
    Ok(())
}
