use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use rayon::prelude::*;
use srdm_core::synthetic::{box_blur, dataset, uniform_noise};
use srdm_core::{save_image, GrayImage, Kernel};

use super::log;
use crate::error::{CliError, CliResult};
use crate::Context;

/// How the generated HR image is derived from the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Identity,
    /// Uniform integer noise of the given width.
    Noise(u32),
    /// Box blur of the given radius.
    Blur(usize),
    /// Constant offset, clamped to 0–255.
    Shift(i16),
}

impl FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |what: &str| format!("`{s}`: {what} needs an integer argument, e.g. {what}:8");
        match kind {
            "identity" if arg.is_empty() => Ok(Generator::Identity),
            "noise" => arg.parse().map(Generator::Noise).map_err(|_| num("noise")),
            "blur" => arg.parse().map(Generator::Blur).map_err(|_| num("blur")),
            "shift" => arg.parse().map(Generator::Shift).map_err(|_| num("shift")),
            _ => Err(format!("unknown generator `{s}` (identity, noise:W, blur:R, shift:N)")),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Identity => f.write_str("identity"),
            Generator::Noise(w) => write!(f, "noise:{w}"),
            Generator::Blur(r) => write!(f, "blur:{r}"),
            Generator::Shift(n) => write!(f, "shift:{n}"),
        }
    }
}

impl Generator {
    pub fn apply(self, hr: &GrayImage, seed: u64) -> GrayImage {
        match self {
            Generator::Identity => hr.clone(),
            Generator::Noise(w) => uniform_noise(hr, w, seed),
            Generator::Blur(r) => box_blur(hr, r),
            Generator::Shift(n) => GrayImage::from_fn(hr.width(), hr.height(), |r, c| {
                (hr.get(r, c) as i16 + n).clamp(0, 255) as u8
            })
            .expect("same dimensions"),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Receives `lr/`, `hr/` and `sr/` subdirectories
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    /// LR width in pixels
    #[arg(long, default_value_t = 64)]
    pub lr_width: usize,
    /// LR height in pixels
    #[arg(long, default_value_t = 64)]
    pub lr_height: usize,
    /// Upscaling factor [default: 4]
    #[arg(long)]
    pub scale: Option<usize>,
    /// Kernel producing the LR images [default: bicubic]
    #[arg(long)]
    pub kernel: Option<Kernel>,
    /// identity, noise:W, blur:R or shift:N
    #[arg(long, default_value = "identity")]
    pub generator: Generator,
    /// File extension of the written images
    #[arg(long, default_value = "png", value_parser = ["png", "pgm"])]
    pub format: String,
}

pub fn run(ctx: &Context, args: SynthArgs) -> CliResult<()> {
    let scale = ctx.file.pick(args.scale, "scale", 4)?;
    let kernel = ctx.file.pick(args.kernel, "kernel", Kernel::default())?;
    if args.count == 0 || args.lr_width == 0 || args.lr_height == 0 || scale == 0 {
        return Err(CliError::input("count, sizes and scale must be positive"));
    }
    let seed = ctx.seed;
    let triples = dataset(
        args.count,
        (args.lr_width, args.lr_height),
        scale,
        kernel,
        seed,
        |hr, i| {
            args.generator
                .apply(hr, seed.wrapping_add(0x5EED).wrapping_mul(31).wrapping_add(i as u64))
        },
    )?;
    let width = args.count.to_string().len().max(3);
    triples.par_iter().enumerate().try_for_each(|(i, t)| {
        for (sub, img) in [("lr", &t.lr), ("hr", &t.hr_gt), ("sr", &t.hr_gen)] {
            let dir = args.out_dir.join(sub);
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
            save_image(img, dir.join(format!("img_{i:0width$}.{}", args.format)))
                .map_err(|e| CliError::internal(e.to_string()))?;
        }
        Ok::<_, CliError>(())
    })?;
    log(
        "synth",
        format!(
            "wrote {} triples ({}) to {}",
            args.count,
            args.generator,
            args.out_dir.display()
        ),
    );
    Ok(())
}
