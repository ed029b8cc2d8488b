//! MovieLens-format ratings: ingestion, summary statistics, and the
//! checkpointed data-accumulation experiment.
//!
//! The accumulation experiment repeatedly (per outer iteration) holds out
//! one rating per user, re-shuffles the remaining rows into a fake
//! chronology, and retrains a fresh factor model every time the number of
//! items with at least `popularity_threshold` ratings crosses the next
//! checkpoint. Rows of sub-threshold items stay in the training data; the
//! threshold only defines the checkpoint clock.

pub mod synthetic;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cf::{self, Hyperparams, Rating};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{self, FiveNumber};

/// One ratings row: integer rating 1..=5 with a timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingRow {
    pub user: u32,
    pub item: u32,
    pub rating: u8,
    pub timestamp: i64,
}

/// Validated ratings table with no duplicate (user, item) pairs.
#[derive(Debug, Clone, Default)]
pub struct RatingsDataset {
    rows: Vec<RatingRow>,
}

impl RatingsDataset {
    /// Validates every row and the no-duplicates invariant.
    pub fn new(rows: Vec<RatingRow>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            validate_row(row)?;
            if !seen.insert((row.user, row.item)) {
                return Err(Error::validation(format!(
                    "duplicate rating for (user {}, item {})",
                    row.user, row.item
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[RatingRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn validate_row(row: &RatingRow) -> Result<()> {
    if row.user == 0 || row.item == 0 {
        return Err(Error::validation(format!(
            "ids must be positive, got user {} item {}",
            row.user, row.item
        )));
    }
    if !(1..=5).contains(&row.rating) {
        return Err(Error::validation(format!(
            "rating must be an integer 1..5, got {}",
            row.rating
        )));
    }
    Ok(())
}

/// Parses a `UserID::MovieID::Rating::Timestamp` file.
pub fn load_movielens(path: impl AsRef<Path>) -> Result<RatingsDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 '::'-separated fields, got {}", fields.len()),
            });
        }
        let parse_num = |name: &str, s: &str| -> Result<i64> {
            s.trim().parse::<i64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("{name} '{s}' is not an integer"),
            })
        };
        let user = parse_num("user id", fields[0])?;
        let item = parse_num("movie id", fields[1])?;
        let rating = parse_num("rating", fields[2])?;
        let timestamp = parse_num("timestamp", fields[3])?;
        if user <= 0 || user > u32::MAX as i64 || item <= 0 || item > u32::MAX as i64 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("ids must be positive integers, got {user}::{item}"),
            });
        }
        if !(1..=5).contains(&rating) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("rating must be 1..5, got {rating}"),
            });
        }
        let row = RatingRow {
            user: user as u32,
            item: item as u32,
            rating: rating as u8,
            timestamp,
        };
        if !seen.insert((row.user, row.item)) {
            return Err(Error::validation(format!(
                "line {lineno}: duplicate rating for (user {}, item {})",
                row.user, row.item
            )));
        }
        rows.push(row);
    }
    Ok(RatingsDataset { rows })
}

/// Summary statistics of a ratings table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_ratings: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub rating: Stats,
    pub per_user_count: Stats,
    pub per_item_count: Stats,
    /// Items with at least `popularity_threshold` ratings.
    pub items_at_threshold: usize,
    pub popularity_threshold: usize,
}

/// Mean plus lower nearest-rank five-number summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

impl From<FiveNumber> for Stats {
    fn from(f: FiveNumber) -> Self {
        Stats {
            mean: f.mean,
            min: f.min,
            p25: f.p25,
            p50: f.p50,
            p75: f.p75,
            max: f.max,
        }
    }
}

/// Computes rating, per-user, and per-item summary statistics.
pub fn summarize(ds: &RatingsDataset, popularity_threshold: usize) -> Result<DatasetSummary> {
    if ds.is_empty() {
        return Err(Error::invalid_argument("dataset is empty"));
    }
    let ratings: Vec<f64> = ds.rows.iter().map(|r| r.rating as f64).collect();
    let mut user_counts: HashMap<u32, usize> = HashMap::new();
    let mut item_counts: HashMap<u32, usize> = HashMap::new();
    for r in &ds.rows {
        *user_counts.entry(r.user).or_insert(0) += 1;
        *item_counts.entry(r.item).or_insert(0) += 1;
    }
    let per_user: Vec<f64> = user_counts.values().map(|&c| c as f64).collect();
    let per_item: Vec<f64> = item_counts.values().map(|&c| c as f64).collect();
    let items_at_threshold = item_counts
        .values()
        .filter(|&&c| c >= popularity_threshold)
        .count();
    Ok(DatasetSummary {
        n_ratings: ds.len(),
        n_users: user_counts.len(),
        n_items: item_counts.len(),
        rating: stats::five_number_summary(&ratings).into(),
        per_user_count: stats::five_number_summary(&per_user).into(),
        per_item_count: stats::five_number_summary(&per_item).into(),
        items_at_threshold,
        popularity_threshold,
    })
}

/// Moves exactly one uniformly chosen rating per user into the holdout.
///
/// Users are processed in ascending id order so the split is a pure
/// function of the stream. Fails if any user has fewer than two ratings.
pub fn make_holdout<R: Rng + ?Sized>(
    ds: &RatingsDataset,
    rng: &mut R,
) -> Result<(Vec<RatingRow>, Vec<RatingRow>)> {
    let mut by_user: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.rows.iter().enumerate() {
        by_user.entry(r.user).or_default().push(i);
    }
    let mut held = vec![false; ds.len()];
    for (user, indices) in &by_user {
        if indices.len() < 2 {
            return Err(Error::validation(format!(
                "user {user} has only {} rating(s); the holdout needs at least 2",
                indices.len()
            )));
        }
        let pick = indices[rng.random_range(0..indices.len())];
        held[pick] = true;
    }
    let mut train_pool = Vec::with_capacity(ds.len() - by_user.len());
    let mut holdout = Vec::with_capacity(by_user.len());
    for (i, r) in ds.rows.iter().enumerate() {
        if held[i] {
            holdout.push(*r);
        } else {
            train_pool.push(*r);
        }
    }
    Ok((train_pool, holdout))
}

/// Controls for the accumulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulationConfig {
    pub outer_iterations: usize,
    pub checkpoint_step: usize,
    pub checkpoint_max: usize,
    /// Ratings an item needs before it counts toward the checkpoint clock.
    pub popularity_threshold: usize,
    /// Numerator of the reference curve `C / sqrt(N_r)`.
    pub rootn_constant: f64,
    pub hp: Hyperparams,
    pub base_seed: u64,
}

impl Default for AccumulationConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 20,
            checkpoint_step: 100,
            checkpoint_max: 2_000,
            popularity_threshold: 100,
            rootn_constant: 100.0,
            hp: Hyperparams::default(),
            base_seed: 0,
        }
    }
}

impl AccumulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iterations < 1 {
            return Err(Error::invalid_argument("outer_iterations must be >= 1"));
        }
        if self.checkpoint_step < 1 {
            return Err(Error::invalid_argument("checkpoint_step must be >= 1"));
        }
        if self.checkpoint_max < self.checkpoint_step {
            return Err(Error::invalid_argument(
                "checkpoint_max must be >= checkpoint_step",
            ));
        }
        if self.popularity_threshold < 1 {
            return Err(Error::invalid_argument("popularity_threshold must be >= 1"));
        }
        self.hp.validate()
    }
}

/// Metrics at one checkpoint of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointReport {
    pub k_prime: usize,
    pub rmse: f64,
    pub share_full: f64,
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    /// `C / sqrt(n_ratings)`.
    pub rootn_baseline: f64,
}

/// All checkpoints of one outer iteration.
#[derive(Debug, Clone)]
pub struct IterationReport {
    pub iteration: usize,
    pub checkpoints: Vec<CheckpointReport>,
    /// Largest checkpoint that was reachable, when smaller than
    /// `checkpoint_max`.
    pub truncated_at: Option<usize>,
}

/// Outcome of a whole accumulation batch. Failed iterations are recorded
/// and skipped by aggregation; the batch itself keeps going.
#[derive(Debug, Clone)]
pub struct AccumulationResult {
    pub iterations: Vec<IterationReport>,
    pub failures: Vec<(usize, String)>,
}

// Stream roles within one outer iteration. The split/shuffle stream and
// each checkpoint's training stream must not overlap.
fn split_stream(iteration: usize) -> u64 {
    (iteration as u64) << 32
}

fn model_seed(base_seed: u64, iteration: usize, checkpoint_index: usize) -> u64 {
    base_seed
        ^ (((iteration as u64) << 32) | (1 + checkpoint_index as u64))
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the accumulation experiment.
///
/// Per outer iteration: draw the one-per-user holdout, shuffle the
/// remaining rows into a fake chronology (fake timestamp = permutation
/// index), and for each checkpoint k' train a fresh model on all rows up
/// to the first position where k' items have reached the popularity
/// threshold. Iterations whose dataset cannot reach `checkpoint_max`
/// truncate at the largest reachable checkpoint.
pub fn run_accumulation(
    ds: &RatingsDataset,
    cfg: &AccumulationConfig,
) -> Result<AccumulationResult> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::invalid_argument("dataset is empty"));
    }

    let outcomes: Vec<(usize, Result<IterationReport>)> = (0..cfg.outer_iterations)
        .into_par_iter()
        .map(|i| (i, run_iteration(ds, cfg, i)))
        .collect();

    let mut iterations = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        match outcome {
            Ok(report) => iterations.push(report),
            Err(Error::Divergence { epoch, msg }) => {
                failures.push((i, format!("training diverged at epoch {epoch}: {msg}")));
            }
            Err(e) => return Err(e.in_trajectory(i)),
        }
    }
    Ok(AccumulationResult {
        iterations,
        failures,
    })
}

/// Reproduces the exact holdout draw and fake-chronology shuffle of one
/// outer iteration: the returned pool is ordered by fake timestamp, so a
/// checkpoint's training set is a prefix of it.
pub fn iteration_split(
    ds: &RatingsDataset,
    cfg: &AccumulationConfig,
    iteration: usize,
) -> Result<(Vec<RatingRow>, Vec<RatingRow>)> {
    let mut rng = RngStream::new(cfg.base_seed, split_stream(iteration)).rng();
    let (mut pool, holdout) = make_holdout(ds, &mut rng)?;
    pool.shuffle(&mut rng);
    Ok((pool, holdout))
}

/// One pass over a fake chronology: for each checkpoint target k', the
/// index of the first row at which k' items have reached the popularity
/// threshold. Returns (k', last included row index) pairs.
pub fn checkpoint_boundaries(pool: &[RatingRow], cfg: &AccumulationConfig) -> Vec<(usize, usize)> {
    let mut item_counts: HashMap<u32, usize> = HashMap::new();
    let mut popular = 0usize;
    let mut boundaries: Vec<(usize, usize)> = Vec::new();
    let mut next_target = cfg.checkpoint_step;
    for (t, row) in pool.iter().enumerate() {
        let c = item_counts.entry(row.item).or_insert(0);
        *c += 1;
        if *c == cfg.popularity_threshold {
            popular += 1;
            while next_target <= cfg.checkpoint_max && popular >= next_target {
                boundaries.push((next_target, t));
                next_target += cfg.checkpoint_step;
            }
            if next_target > cfg.checkpoint_max {
                break;
            }
        }
    }
    boundaries
}

fn run_iteration(
    ds: &RatingsDataset,
    cfg: &AccumulationConfig,
    iteration: usize,
) -> Result<IterationReport> {
    let (pool, holdout_rows) = iteration_split(ds, cfg, iteration)?;
    // Fake timestamp of pool[t] is t; checkpoints train on prefixes.

    let holdout: Vec<Rating> = holdout_rows
        .iter()
        .map(|r| Rating::new(r.user, r.item, r.rating as f64))
        .collect();

    let boundaries = checkpoint_boundaries(&pool, cfg);
    if boundaries.is_empty() {
        return Err(Error::validation(format!(
            "iteration {iteration}: no checkpoint reachable (first target {} popular items, threshold {})",
            cfg.checkpoint_step, cfg.popularity_threshold
        )));
    }
    let truncated_at = if boundaries.last().unwrap().0 < cfg.checkpoint_max {
        Some(boundaries.last().unwrap().0)
    } else {
        None
    };

    let mut checkpoints = Vec::with_capacity(boundaries.len());
    for (c_idx, &(k_prime, t)) in boundaries.iter().enumerate() {
        let slice = &pool[..=t];
        let train_set: Vec<Rating> = slice
            .iter()
            .map(|r| Rating::new(r.user, r.item, r.rating as f64))
            .collect();
        let model = cf::train(&train_set, &cfg.hp, model_seed(cfg.base_seed, iteration, c_idx))?;
        let (rmse, share_full) = cf::evaluate_rmse(&model, &holdout)?;
        let n_users = slice.iter().map(|r| r.user).collect::<HashSet<_>>().len();
        let n_items = slice.iter().map(|r| r.item).collect::<HashSet<_>>().len();
        let n_ratings = slice.len();
        checkpoints.push(CheckpointReport {
            k_prime,
            rmse,
            share_full,
            n_users,
            n_items,
            n_ratings,
            rootn_baseline: cfg.rootn_constant / (n_ratings as f64).sqrt(),
        });
    }

    Ok(IterationReport {
        iteration,
        checkpoints,
        truncated_at,
    })
}

/// Cross-iteration means aligned on k', matching the aggregate CSV schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub k_prime: usize,
    pub mean_rmse: f64,
    pub stderr_rmse: f64,
    pub mean_share_full: f64,
    pub mean_n_users: f64,
    pub mean_n_items: f64,
    pub mean_n_ratings: f64,
    pub mean_rootn: f64,
}

/// Averages checkpoint metrics across iterations, aligned on k'.
pub fn aggregate_reports(iterations: &[IterationReport]) -> Result<Vec<AggregateRow>> {
    if iterations.is_empty() {
        return Err(Error::invalid_argument(
            "no successful iterations to aggregate",
        ));
    }
    let mut by_k: BTreeMap<usize, Vec<&CheckpointReport>> = BTreeMap::new();
    for it in iterations {
        for cp in &it.checkpoints {
            by_k.entry(cp.k_prime).or_default().push(cp);
        }
    }
    Ok(by_k
        .into_iter()
        .map(|(k_prime, cps)| {
            let rmse: Vec<f64> = cps.iter().map(|c| c.rmse).collect();
            AggregateRow {
                k_prime,
                mean_rmse: stats::mean(&rmse),
                stderr_rmse: stats::standard_error(&rmse),
                mean_share_full: stats::mean(&cps.iter().map(|c| c.share_full).collect::<Vec<_>>()),
                mean_n_users: stats::mean(&cps.iter().map(|c| c.n_users as f64).collect::<Vec<_>>()),
                mean_n_items: stats::mean(&cps.iter().map(|c| c.n_items as f64).collect::<Vec<_>>()),
                mean_n_ratings: stats::mean(
                    &cps.iter().map(|c| c.n_ratings as f64).collect::<Vec<_>>(),
                ),
                mean_rootn: stats::mean(&cps.iter().map(|c| c.rootn_baseline).collect::<Vec<_>>()),
            }
        })
        .collect())
}
