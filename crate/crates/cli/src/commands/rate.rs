use std::path::PathBuf;

use clap::Args;
use srdm_core::rating::{methods_in_votes, rate_tournament_with, ratings_to_csv, read_votes, DEFAULT_SHUFFLES};
use srdm_core::{conservative_ranking, RatingPeriod};

use super::log;
use crate::error::CliResult;
use crate::inputs::{read_text, write_text};
use crate::manifest::RunManifest;
use crate::Context;

#[derive(Debug, Args)]
pub struct RateArgs {
    /// CSV with `winner,loser` columns
    pub votes: PathBuf,
    /// Independently shuffled passes to average [default: 100]
    #[arg(long)]
    pub shuffles: Option<usize>,
    /// Treat each pass as a single rating period instead of one per vote
    #[arg(long)]
    pub per_pass: bool,
    /// Output CSV
    #[arg(long, default_value = "ratings.csv")]
    pub out: PathBuf,
}

pub fn run(ctx: &Context, args: RateArgs) -> CliResult<()> {
    let shuffles = ctx.file.pick(args.shuffles, "shuffles", DEFAULT_SHUFFLES)?;
    let votes = read_votes(read_text(&args.votes)?.as_bytes())?;
    let methods = methods_in_votes(&votes);
    log("rate", format!("{} votes over {} methods", votes.len(), methods.len()));
    let period = if args.per_pass {
        RatingPeriod::PerPass
    } else {
        RatingPeriod::PerVote
    };
    let ratings = rate_tournament_with(&votes, &methods, shuffles, ctx.seed, period)?;

    let mut manifest = RunManifest::new("rate", ctx.seed);
    manifest
        .param("shuffles", shuffles)
        .param("rating_period", if args.per_pass { "pass" } else { "vote" })
        .input(&args.votes)
        .output(&args.out);
    write_text(&args.out, &(manifest.csv_comment() + &ratings_to_csv(&ratings)?))?;

    for (rank, (id, lower)) in conservative_ranking(&ratings).iter().enumerate() {
        let r = ratings
            .iter()
            .find(|r| &r.method_id == id)
            .expect("ranked method is rated");
        println!(
            "{:>3}. {id}  lower {lower:.1}  rating {:.1}  deviation {:.1}",
            rank + 1,
            r.rating,
            r.deviation
        );
    }
    Ok(())
}
