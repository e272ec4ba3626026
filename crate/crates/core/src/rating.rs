//! Glicko-1 ratings from pairwise preference votes.
//!
//! Every method starts at rating 1500 with deviation 350. Votes are applied
//! one at a time, each vote being a one-game rating period for both
//! participants, with no deviation inflation between periods. To wash out
//! the dependence on vote order the whole pass is repeated over independently
//! shuffled orderings and the per-method ratings and deviations are averaged.
//! Methods are finally ranked by the lower end of their 95% interval,
//! `r − 1.96σ`.

use std::collections::HashMap;
use std::f64::consts::{LN_10, PI};
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const INITIAL_RATING: f64 = 1500.0;
pub const INITIAL_DEVIATION: f64 = 350.0;
/// z-value of the two-sided 95% interval.
pub const CONFIDENCE_Z: f64 = 1.96;
pub const DEFAULT_SHUFFLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerRating {
    pub method_id: String,
    pub rating: f64,
    pub deviation: f64,
}

impl PlayerRating {
    pub fn new(method_id: impl Into<String>, rating: f64, deviation: f64) -> Self {
        Self {
            method_id: method_id.into(),
            rating,
            deviation,
        }
    }

    pub fn initial(method_id: impl Into<String>) -> Self {
        Self::new(method_id, INITIAL_RATING, INITIAL_DEVIATION)
    }

    pub fn lower_bound(&self) -> f64 {
        self.rating - CONFIDENCE_Z * self.deviation
    }

    fn validate(&self) -> Result<()> {
        if !self.rating.is_finite() {
            return Err(Error::NonFinite("rating"));
        }
        if !(self.deviation > 0.0 && self.deviation <= INITIAL_DEVIATION) {
            return Err(invalid(format!(
                "deviation of `{}` must be in (0, {INITIAL_DEVIATION}], got {}",
                self.method_id, self.deviation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoteRecord {
    pub winner: String,
    pub loser: String,
}

impl VoteRecord {
    pub fn new(winner: impl Into<String>, loser: impl Into<String>) -> Result<Self> {
        let (winner, loser) = (winner.into(), loser.into());
        if winner == loser {
            return Err(invalid(format!("vote of `{winner}` against itself")));
        }
        Ok(Self { winner, loser })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlickoParams {
    pub q: f64,
}

impl Default for GlickoParams {
    fn default() -> Self {
        Self { q: LN_10 / 400.0 }
    }
}

impl GlickoParams {
    /// Attenuation of an opponent's influence by their deviation.
    pub fn g(&self, deviation: f64) -> f64 {
        1.0 / (1.0 + 3.0 * self.q * self.q * deviation * deviation / (PI * PI)).sqrt()
    }

    /// Expected score of `rating` against an opponent.
    pub fn expected(&self, rating: f64, opp_rating: f64, opp_deviation: f64) -> f64 {
        1.0 / (1.0 + 10f64.powf(-self.g(opp_deviation) * (rating - opp_rating) / 400.0))
    }
}

/// One-period Glicko-1 update of `player` against `results` given as
/// (opponent, score) with score 1 for a win and 0 for a loss.
pub fn glicko_update(
    player: &PlayerRating,
    results: &[(PlayerRating, f64)],
    params: &GlickoParams,
) -> Result<PlayerRating> {
    if results.is_empty() {
        return Err(Error::Empty("rating period without games".into()));
    }
    player.validate()?;
    let q = params.q;
    let mut d_inv = 0.0;
    let mut delta = 0.0;
    for (opp, score) in results {
        opp.validate()?;
        if !(0.0..=1.0).contains(score) {
            return Err(invalid(format!("score {score} outside [0, 1]")));
        }
        let g = params.g(opp.deviation);
        let e = params.expected(player.rating, opp.rating, opp.deviation);
        d_inv += g * g * e * (1.0 - e);
        delta += g * (score - e);
    }
    let d2_inv = q * q * d_inv;
    let precision = 1.0 / (player.deviation * player.deviation) + d2_inv;
    let rating = player.rating + q / precision * delta;
    let deviation = (1.0 / precision).sqrt();
    if !rating.is_finite() || !deviation.is_finite() {
        return Err(Error::NonFinite("Glicko update"));
    }
    Ok(PlayerRating::new(player.method_id.clone(), rating, deviation))
}

/// How a pass over the votes is cut into rating periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatingPeriod {
    /// Each vote is its own period.
    #[default]
    PerVote,
    /// The whole pass is a single period (order-independent).
    PerPass,
}

fn index_votes(votes: &[VoteRecord], methods: &[String]) -> Result<Vec<(usize, usize)>> {
    let lookup: HashMap<&str, usize> = methods.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    if lookup.len() != methods.len() {
        return Err(invalid("duplicate method ids"));
    }
    votes
        .iter()
        .map(|v| {
            if v.winner == v.loser {
                return Err(invalid(format!("vote of `{}` against itself", v.winner)));
            }
            let w = *lookup
                .get(v.winner.as_str())
                .ok_or_else(|| Error::UnknownMethod(v.winner.clone()))?;
            let l = *lookup
                .get(v.loser.as_str())
                .ok_or_else(|| Error::UnknownMethod(v.loser.clone()))?;
            Ok((w, l))
        })
        .collect()
}

fn run_pass(
    order: &[(usize, usize)],
    methods: &[String],
    period: RatingPeriod,
    params: &GlickoParams,
) -> Result<Vec<PlayerRating>> {
    let mut ratings: Vec<PlayerRating> = methods.iter().map(PlayerRating::initial).collect();
    match period {
        RatingPeriod::PerVote => {
            for &(w, l) in order {
                let new_w = glicko_update(&ratings[w], &[(ratings[l].clone(), 1.0)], params)?;
                let new_l = glicko_update(&ratings[l], &[(ratings[w].clone(), 0.0)], params)?;
                ratings[w] = new_w;
                ratings[l] = new_l;
            }
        }
        RatingPeriod::PerPass => {
            let mut games: Vec<Vec<(PlayerRating, f64)>> = vec![Vec::new(); methods.len()];
            for &(w, l) in order {
                games[w].push((ratings[l].clone(), 1.0));
                games[l].push((ratings[w].clone(), 0.0));
            }
            ratings = ratings
                .iter()
                .zip(&games)
                .map(|(r, g)| {
                    if g.is_empty() {
                        Ok(r.clone())
                    } else {
                        glicko_update(r, g, params)
                    }
                })
                .collect::<Result<_>>()?;
        }
    }
    Ok(ratings)
}

/// Rates `methods` from `votes`, averaging rating and deviation over
/// `shuffles` independently permuted passes. Output follows `methods` order.
pub fn rate_tournament_with(
    votes: &[VoteRecord],
    methods: &[String],
    shuffles: usize,
    seed: u64,
    period: RatingPeriod,
) -> Result<Vec<PlayerRating>> {
    if votes.is_empty() {
        return Err(Error::Empty("no votes".into()));
    }
    if shuffles == 0 {
        return Err(invalid("shuffles must be >= 1"));
    }
    let indexed = index_votes(votes, methods)?;
    let params = GlickoParams::default();
    let passes: Vec<Vec<PlayerRating>> = (0..shuffles)
        .into_par_iter()
        .map(|pass| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(pass as u64);
            let mut order = indexed.clone();
            order.shuffle(&mut rng);
            run_pass(&order, methods, period, &params)
        })
        .collect::<Result<_>>()?;
    let n = shuffles as f64;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let rating = passes.iter().map(|p| p[i].rating).sum::<f64>() / n;
            let deviation = passes.iter().map(|p| p[i].deviation).sum::<f64>() / n;
            PlayerRating::new(m.clone(), rating, deviation)
        })
        .collect())
}

pub fn rate_tournament(
    votes: &[VoteRecord],
    methods: &[String],
    shuffles: usize,
    seed: u64,
) -> Result<Vec<PlayerRating>> {
    rate_tournament_with(votes, methods, shuffles, seed, RatingPeriod::PerVote)
}

/// Method ids in order of first appearance in the votes.
pub fn methods_in_votes(votes: &[VoteRecord]) -> Vec<String> {
    let mut seen = Vec::new();
    for v in votes {
        for m in [&v.winner, &v.loser] {
            if !seen.contains(m) {
                seen.push(m.clone());
            }
        }
    }
    seen
}

/// Sorts by `r − 1.96σ` descending; ties by higher rating, then method id.
pub fn conservative_ranking(ratings: &[PlayerRating]) -> Vec<(String, f64)> {
    let mut sorted: Vec<&PlayerRating> = ratings.iter().collect();
    sorted.sort_by(|a, b| {
        b.lower_bound()
            .total_cmp(&a.lower_bound())
            .then(b.rating.total_cmp(&a.rating))
            .then(a.method_id.cmp(&b.method_id))
    });
    sorted
        .into_iter()
        .map(|r| (r.method_id.clone(), r.lower_bound()))
        .collect()
}

/// Parses a `winner,loser` CSV.
pub fn read_votes(reader: impl Read) -> Result<Vec<VoteRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| invalid(format!("votes CSV has no `{name}` column")))
    };
    let (wi, li) = (col("winner")?, col("loser")?);
    let mut votes = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        votes.push(VoteRecord::new(&rec[wi], &rec[li])?);
    }
    Ok(votes)
}

/// `method,rating,deviation,lower_bound`, rows in conservative-ranking order.
pub fn ratings_to_csv(ratings: &[PlayerRating]) -> Result<String> {
    let by_id: HashMap<&str, &PlayerRating> = ratings.iter().map(|r| (r.method_id.as_str(), r)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "rating", "deviation", "lower_bound"])?;
    for (id, lower) in conservative_ranking(ratings) {
        let r = by_id[id.as_str()];
        w.write_record([
            id.clone(),
            r.rating.to_string(),
            r.deviation.to_string(),
            lower.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
