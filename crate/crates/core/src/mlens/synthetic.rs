//! Synthetic MovieLens-style datasets for experiments that should run
//! without the external distribution file.
//!
//! Ratings come from a biased low-rank latent model
//! (`center + b_u + b_i + f_u . f_i + noise`, rounded to the integer
//! scale), and item popularity follows a power law so popular items cross
//! rating-count thresholds earlier, like real recommendation data. The
//! bias terms matter: they are what a recommender can estimate from a
//! handful of observations per user or item, so they make accuracy
//! improve measurably as data accumulates even at desk scale.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlens::{RatingRow, RatingsDataset};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_users: u32,
    pub n_items: u32,
    pub mean_ratings_per_user: f64,
    /// Every user gets at least this many ratings (the holdout split needs
    /// two or more).
    pub min_ratings_per_user: usize,
    /// Rank of the latent factor model.
    pub rank: usize,
    pub noise_std: f64,
    pub factor_scale: f64,
    /// Std of the true user and item bias terms.
    pub bias_std: f64,
    /// Popularity of item ranked r is proportional to (r+1)^-exponent.
    pub popularity_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 1_000,
            n_items: 300,
            mean_ratings_per_user: 30.0,
            min_ratings_per_user: 4,
            rank: 5,
            noise_std: 0.3,
            factor_scale: 0.5,
            bias_std: 0.5,
            popularity_exponent: 0.8,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::invalid_argument("need at least one user and item"));
        }
        if self.min_ratings_per_user < 2 {
            return Err(Error::invalid_argument(
                "min_ratings_per_user must be >= 2 for the holdout split",
            ));
        }
        if self.min_ratings_per_user as u32 > self.n_items {
            return Err(Error::invalid_argument(
                "min_ratings_per_user cannot exceed the item count",
            ));
        }
        if self.mean_ratings_per_user < self.min_ratings_per_user as f64 {
            return Err(Error::invalid_argument(
                "mean_ratings_per_user below min_ratings_per_user",
            ));
        }
        let scales_ok =
            self.noise_std >= 0.0 && self.factor_scale > 0.0 && self.bias_std >= 0.0;
        if self.rank == 0 || !scales_ok {
            return Err(Error::invalid_argument(
                "rank must be >= 1, noise_std >= 0, factor_scale > 0, bias_std >= 0",
            ));
        }
        Ok(())
    }
}

/// Generates an integer-rated dataset with power-law item popularity.
///
/// Per user, the rating count is drawn around the configured mean and the
/// items are sampled without replacement, weighted by popularity rank.
/// Ids are 1-based.
pub fn power_law_dataset(cfg: &SyntheticConfig) -> Result<RatingsDataset> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    let normal = Normal::new(0.0, 1.0).unwrap();

    let user_factors: Vec<Vec<f64>> = (0..cfg.n_users)
        .map(|_| {
            (0..cfg.rank)
                .map(|_| cfg.factor_scale * normal.sample(&mut rng))
                .collect()
        })
        .collect();
    let item_factors: Vec<Vec<f64>> = (0..cfg.n_items)
        .map(|_| {
            (0..cfg.rank)
                .map(|_| cfg.factor_scale * normal.sample(&mut rng))
                .collect()
        })
        .collect();
    let user_bias: Vec<f64> = (0..cfg.n_users)
        .map(|_| cfg.bias_std * normal.sample(&mut rng))
        .collect();
    let item_bias: Vec<f64> = (0..cfg.n_items)
        .map(|_| cfg.bias_std * normal.sample(&mut rng))
        .collect();

    // Cumulative popularity weights over item ranks.
    let weights: Vec<f64> = (0..cfg.n_items)
        .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.popularity_exponent))
        .collect();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let total_weight = acc;

    let spread = (cfg.mean_ratings_per_user - cfg.min_ratings_per_user as f64).max(0.0);
    let mut rows = Vec::new();
    for user in 0..cfg.n_users {
        // Count around the mean, at least the minimum, at most the catalog.
        let extra = (2.0 * spread * rng.random::<f64>()).round() as usize;
        let count = (cfg.min_ratings_per_user + extra).min(cfg.n_items as usize);
        let mut chosen: Vec<u32> = Vec::with_capacity(count);
        let mut guard = 0;
        while chosen.len() < count {
            let x = rng.random::<f64>() * total_weight;
            let idx = cumulative.partition_point(|&c| c < x) as u32;
            let idx = idx.min(cfg.n_items - 1);
            if !chosen.contains(&idx) {
                chosen.push(idx);
            }
            guard += 1;
            if guard > 100_000 {
                return Err(Error::numerical(
                    "item sampling failed to fill the per-user quota",
                ));
            }
        }
        for item in chosen {
            let fu = &user_factors[user as usize];
            let fi = &item_factors[item as usize];
            let dot: f64 = fu.iter().zip(fi.iter()).map(|(a, b)| a * b).sum();
            let raw = 3.0
                + user_bias[user as usize]
                + item_bias[item as usize]
                + dot
                + cfg.noise_std * normal.sample(&mut rng);
            let rating = raw.round().clamp(1.0, 5.0) as u8;
            rows.push(RatingRow {
                user: user + 1,
                item: item + 1,
                rating,
                timestamp: rows.len() as i64,
            });
        }
    }
    RatingsDataset::new(rows)
}
