//! SVD-style matrix-factorization recommender with user/item biases.
//!
//! Predictions are `alpha + b_u + b_i + f_u . f_i`, trained by stochastic
//! gradient descent on the squared error with L2 regularization of biases
//! and factors. Unseen users or items degrade gracefully through tiered
//! fallback predictions down to the global mean.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One observed rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

impl Rating {
    pub fn new(user: u32, item: u32, value: f64) -> Self {
        Self { user, item, value }
    }
}

/// SGD training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_factors: usize,
    pub n_epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    /// Std of the zero-mean normal factor initialization.
    pub init_std: f64,
    /// Inclusive interval predictions are clipped into.
    pub clip_range: (f64, f64),
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_factors: 100,
            n_epochs: 20,
            learning_rate: 0.005,
            regularization: 0.02,
            init_std: 0.1,
            clip_range: (1.0, 5.0),
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_factors == 0 || self.n_epochs == 0 {
            return Err(Error::invalid_argument(
                "n_factors and n_epochs must be positive",
            ));
        }
        let positive =
            self.learning_rate > 0.0 && self.regularization > 0.0 && self.init_std > 0.0;
        if !positive {
            return Err(Error::invalid_argument(
                "learning_rate, regularization, and init_std must be positive",
            ));
        }
        let ordered = self.clip_range.0 < self.clip_range.1;
        if !ordered {
            return Err(Error::invalid_argument(format!(
                "clip range must satisfy min < max, got {:?}",
                self.clip_range
            )));
        }
        Ok(())
    }
}

/// Which parameters back a prediction, depending on index membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionTier {
    /// Both user and item known: full model.
    Full,
    /// Item unknown: constant plus user bias.
    UserBiasOnly,
    /// User unknown: constant plus item bias.
    ItemBiasOnly,
    /// Neither known: the constant alone.
    ConstantOnly,
}

/// Trained factor model. Dense indices are assigned in first-appearance
/// order of the training set, which keeps training deterministic for a
/// fixed seed and input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdModel {
    alpha: f64,
    n_factors: usize,
    clip_range: (f64, f64),
    user_ids: Vec<u32>,
    item_ids: Vec<u32>,
    user_index: HashMap<u32, usize>,
    item_index: HashMap<u32, usize>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    /// Row-major `n_users x n_factors`.
    user_factors: Vec<f64>,
    /// Row-major `n_items x n_factors`.
    item_factors: Vec<f64>,
}

/// Trains a model on the given ratings.
///
/// The constant is the training-set mean; biases start at zero and factors
/// at Normal(0, init_std) draws from the seeded stream. Each epoch iterates
/// the ratings in stored order without shuffling.
pub fn train(train_set: &[Rating], hp: &Hyperparams, seed: u64) -> Result<SvdModel> {
    train_with_trace(train_set, hp, seed).map(|(model, _)| model)
}

/// As [`train`], also returning the training-set MSE recomputed after each
/// epoch.
pub fn train_with_trace(
    train_set: &[Rating],
    hp: &Hyperparams,
    seed: u64,
) -> Result<(SvdModel, Vec<f64>)> {
    hp.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid_argument("training set is empty"));
    }
    let (lo, hi) = hp.clip_range;
    for r in train_set {
        if !r.value.is_finite() || r.value < lo || r.value > hi {
            return Err(Error::invalid_argument(format!(
                "rating {} for (user {}, item {}) outside clip range [{lo}, {hi}]",
                r.value, r.user, r.item
            )));
        }
    }

    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut user_index = HashMap::new();
    let mut item_index = HashMap::new();
    for r in train_set {
        user_index.entry(r.user).or_insert_with(|| {
            user_ids.push(r.user);
            user_ids.len() - 1
        });
        item_index.entry(r.item).or_insert_with(|| {
            item_ids.push(r.item);
            item_ids.len() - 1
        });
    }
    let n_users = user_ids.len();
    let n_items = item_ids.len();
    let f = hp.n_factors;

    let alpha = train_set.iter().map(|r| r.value).sum::<f64>() / train_set.len() as f64;
    let mut user_bias = vec![0.0; n_users];
    let mut item_bias = vec![0.0; n_items];

    let mut rng = RngStream::new(seed, 0).rng();
    let normal = Normal::new(0.0, hp.init_std)
        .map_err(|e| Error::invalid_argument(format!("init_std {}: {e}", hp.init_std)))?;
    let mut user_factors = vec![0.0; n_users * f];
    for v in user_factors.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    let mut item_factors = vec![0.0; n_items * f];
    for v in item_factors.iter_mut() {
        *v = normal.sample(&mut rng);
    }

    let lr = hp.learning_rate;
    let reg = hp.regularization;
    let mut epoch_mse = Vec::with_capacity(hp.n_epochs);
    for epoch in 0..hp.n_epochs {
        for r in train_set {
            let u = user_index[&r.user];
            let i = item_index[&r.item];
            let uf = u * f;
            let itf = i * f;
            let mut dot = 0.0;
            for d in 0..f {
                dot += user_factors[uf + d] * item_factors[itf + d];
            }
            let err = r.value - (alpha + user_bias[u] + item_bias[i] + dot);
            if !err.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    msg: format!("non-finite error on (user {}, item {})", r.user, r.item),
                });
            }
            user_bias[u] += lr * (err - reg * user_bias[u]);
            item_bias[i] += lr * (err - reg * item_bias[i]);
            for d in 0..f {
                let fu_old = user_factors[uf + d];
                let fi_old = item_factors[itf + d];
                user_factors[uf + d] += lr * (err * fi_old - reg * fu_old);
                item_factors[itf + d] += lr * (err * fu_old - reg * fi_old);
            }
        }
        // End-of-epoch training MSE over unclipped predictions.
        let mut ss = 0.0;
        for r in train_set {
            let u = user_index[&r.user];
            let i = item_index[&r.item];
            let mut dot = 0.0;
            for d in 0..f {
                dot += user_factors[u * f + d] * item_factors[i * f + d];
            }
            let e = r.value - (alpha + user_bias[u] + item_bias[i] + dot);
            ss += e * e;
        }
        let mse = ss / train_set.len() as f64;
        if !mse.is_finite() {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                msg: "non-finite training MSE".to_string(),
            });
        }
        epoch_mse.push(mse);
    }

    Ok((
        SvdModel {
            alpha,
            n_factors: f,
            clip_range: hp.clip_range,
            user_ids,
            item_ids,
            user_index,
            item_index,
            user_bias,
            item_bias,
            user_factors,
            item_factors,
        },
        epoch_mse,
    ))
}

impl SvdModel {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn clip_range(&self) -> (f64, f64) {
        self.clip_range
    }

    pub fn user_bias(&self, user: u32) -> Option<f64> {
        self.user_index.get(&user).map(|&u| self.user_bias[u])
    }

    pub fn item_bias(&self, item: u32) -> Option<f64> {
        self.item_index.get(&item).map(|&i| self.item_bias[i])
    }

    pub fn user_factor(&self, user: u32, dim: usize) -> Option<f64> {
        self.user_index
            .get(&user)
            .map(|&u| self.user_factors[u * self.n_factors + dim])
    }

    pub fn item_factor(&self, item: u32, dim: usize) -> Option<f64> {
        self.item_index
            .get(&item)
            .map(|&i| self.item_factors[i * self.n_factors + dim])
    }

    /// Predicts a rating, clipped into the model's rating interval.
    pub fn predict(&self, user: u32, item: u32) -> (f64, PredictionTier) {
        let (raw, tier) = self.predict_unclipped(user, item);
        (raw.clamp(self.clip_range.0, self.clip_range.1), tier)
    }

    /// Raw prediction without interval clipping.
    pub fn predict_unclipped(&self, user: u32, item: u32) -> (f64, PredictionTier) {
        match (self.user_index.get(&user), self.item_index.get(&item)) {
            (Some(&u), Some(&i)) => {
                let mut dot = 0.0;
                for d in 0..self.n_factors {
                    dot += self.user_factors[u * self.n_factors + d]
                        * self.item_factors[i * self.n_factors + d];
                }
                (
                    self.alpha + self.user_bias[u] + self.item_bias[i] + dot,
                    PredictionTier::Full,
                )
            }
            (Some(&u), None) => (self.alpha + self.user_bias[u], PredictionTier::UserBiasOnly),
            (None, Some(&i)) => (self.alpha + self.item_bias[i], PredictionTier::ItemBiasOnly),
            (None, None) => (self.alpha, PredictionTier::ConstantOnly),
        }
    }

    /// Serializes the model to a versioned JSON container. The round trip
    /// is lossless: floats are written in shortest-roundtrip form.
    pub fn to_json(&self) -> String {
        let f = self.n_factors;
        let container = ModelContainer {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            alpha: self.alpha,
            n_factors: f,
            clip_min: self.clip_range.0,
            clip_max: self.clip_range.1,
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
            user_bias: self.user_bias.clone(),
            item_bias: self.item_bias.clone(),
            user_factors: self.user_factors.chunks(f).map(|c| c.to_vec()).collect(),
            item_factors: self.item_factors.chunks(f).map(|c| c.to_vec()).collect(),
        };
        serde_json::to_string(&container).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ModelContainer = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("model parse: {e}")))?;
        if c.format != MODEL_FORMAT {
            return Err(Error::validation(format!(
                "unexpected model format '{}'",
                c.format
            )));
        }
        if c.version != MODEL_VERSION {
            return Err(Error::validation(format!(
                "unsupported model version {}",
                c.version
            )));
        }
        let f = c.n_factors;
        if c.user_bias.len() != c.user_ids.len()
            || c.item_bias.len() != c.item_ids.len()
            || c.user_factors.len() != c.user_ids.len()
            || c.item_factors.len() != c.item_ids.len()
            || c.user_factors.iter().any(|v| v.len() != f)
            || c.item_factors.iter().any(|v| v.len() != f)
        {
            return Err(Error::validation(
                "model container has inconsistent dimensions",
            ));
        }
        let user_index = c
            .user_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let item_index = c
            .item_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        Ok(SvdModel {
            alpha: c.alpha,
            n_factors: f,
            clip_range: (c.clip_min, c.clip_max),
            user_ids: c.user_ids,
            item_ids: c.item_ids,
            user_index,
            item_index,
            user_bias: c.user_bias,
            item_bias: c.item_bias,
            user_factors: c.user_factors.into_iter().flatten().collect(),
            item_factors: c.item_factors.into_iter().flatten().collect(),
        })
    }
}

const MODEL_FORMAT: &str = "svd-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelContainer {
    format: String,
    version: u32,
    alpha: f64,
    n_factors: usize,
    clip_min: f64,
    clip_max: f64,
    user_ids: Vec<u32>,
    item_ids: Vec<u32>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    user_factors: Vec<Vec<f64>>,
    item_factors: Vec<Vec<f64>>,
}

/// RMSE of clipped predictions on a holdout, plus the fraction of pairs
/// served by the full model.
pub fn evaluate_rmse(model: &SvdModel, holdout: &[Rating]) -> Result<(f64, f64)> {
    evaluate_rmse_with(model, holdout, true)
}

/// As [`evaluate_rmse`]; `clip = false` evaluates raw predictions.
pub fn evaluate_rmse_with(model: &SvdModel, holdout: &[Rating], clip: bool) -> Result<(f64, f64)> {
    if holdout.is_empty() {
        return Err(Error::invalid_argument("holdout set is empty"));
    }
    let mut ss = 0.0;
    let mut full = 0usize;
    for r in holdout {
        let (pred, tier) = if clip {
            model.predict(r.user, r.item)
        } else {
            model.predict_unclipped(r.user, r.item)
        };
        let e = pred - r.value;
        ss += e * e;
        if tier == PredictionTier::Full {
            full += 1;
        }
    }
    Ok((
        (ss / holdout.len() as f64).sqrt(),
        full as f64 / holdout.len() as f64,
    ))
}

/// Draws a synthetic low-rank rating set on a dense user/item grid:
/// each pair is kept with probability `density`, and the rating is
/// `center + f_u . f_i + noise`, clamped into `clip`.
///
/// Continuous-valued ratings; the MovieLens-style integer generator lives
/// in the `mlens` module.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_low_rank<R: Rng + ?Sized>(
    n_users: u32,
    n_items: u32,
    rank: usize,
    density: f64,
    noise_std: f64,
    factor_scale: f64,
    center: f64,
    clip: (f64, f64),
    rng: &mut R,
) -> Vec<Rating> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let users: Vec<Vec<f64>> = (0..n_users)
        .map(|_| {
            (0..rank)
                .map(|_| factor_scale * normal.sample(rng))
                .collect()
        })
        .collect();
    let items: Vec<Vec<f64>> = (0..n_items)
        .map(|_| {
            (0..rank)
                .map(|_| factor_scale * normal.sample(rng))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for (u, fu) in users.iter().enumerate() {
        for (i, fi) in items.iter().enumerate() {
            if rng.random::<f64>() >= density {
                continue;
            }
            let dot: f64 = fu.iter().zip(fi.iter()).map(|(a, b)| a * b).sum();
            let value = (center + dot + noise_std * normal.sample(rng)).clamp(clip.0, clip.1);
            out.push(Rating::new(u as u32, i as u32, value));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_hp(factors: usize, epochs: usize) -> Hyperparams {
        Hyperparams {
            n_factors: factors,
            n_epochs: epochs,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn constant_ratings_reproduce_the_constant() {
        // With a near-zero factor init, the residual factor dot product
        // starts below the tolerance and the SGD never grows it, so every
        // prediction equals the constant.
        let data: Vec<Rating> = (0..20).map(|i| Rating::new(i % 5, i % 4, 3.0)).collect();
        let mut hp = small_hp(10, 20);
        hp.init_std = 1e-5;
        let model = train(&data, &hp, 1).unwrap();
        assert_abs_diff_eq!(model.alpha(), 3.0, epsilon = 1e-12);
        for r in &data {
            let (pred, tier) = model.predict(r.user, r.item);
            assert_eq!(tier, PredictionTier::Full);
            assert!((pred - 3.0).abs() < 1e-6, "pred {pred}");
        }
    }

    #[test]
    fn single_rating_converges_toward_target() {
        // One user, one item, rating r: the regularized fixed point of the
        // bias updates sits just short of r, and the gap closes as the
        // regularization goes to zero.
        let r = 4.5;
        let data = vec![Rating::new(1, 1, r)];
        let mut hp = small_hp(2, 2000);
        hp.init_std = 1e-6;

        hp.regularization = 0.02;
        let big_gap = {
            let m = train(&data, &hp, 3).unwrap();
            (m.predict(1, 1).0 - r).abs()
        };
        hp.regularization = 1e-6;
        let small_gap = {
            let m = train(&data, &hp, 3).unwrap();
            (m.predict(1, 1).0 - r).abs()
        };
        assert!(small_gap < big_gap, "{small_gap} vs {big_gap}");
        assert!(small_gap < 1e-3, "gap {small_gap}");
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let err = train(&[], &Hyperparams::default(), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn out_of_range_rating_is_an_error() {
        let data = vec![Rating::new(1, 1, 9.0)];
        assert!(train(&data, &Hyperparams::default(), 0).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = RngStream::new(8, 0).rng();
        let data = synthetic_low_rank(30, 20, 3, 0.4, 0.1, 0.4, 3.0, (1.0, 5.0), &mut rng);
        let a = train(&data, &small_hp(8, 5), 42).unwrap();
        let b = train(&data, &small_hp(8, 5), 42).unwrap();
        assert_eq!(a, b);
        let c = train(&data, &small_hp(8, 5), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prediction_tiers_cover_membership_cases() {
        let data = vec![Rating::new(1, 10, 4.0), Rating::new(2, 20, 2.0)];
        let model = train(&data, &small_hp(4, 5), 0).unwrap();
        assert_eq!(model.predict(1, 10).1, PredictionTier::Full);
        assert_eq!(model.predict(1, 99).1, PredictionTier::UserBiasOnly);
        assert_eq!(model.predict(99, 10).1, PredictionTier::ItemBiasOnly);
        let (pred, tier) = model.predict(99, 99);
        assert_eq!(tier, PredictionTier::ConstantOnly);
        assert_abs_diff_eq!(pred, model.alpha(), epsilon = 1e-15);
        // Unknown-item prediction is the constant plus the user bias.
        let (p, _) = model.predict_unclipped(1, 99);
        assert_abs_diff_eq!(
            p,
            model.alpha() + model.user_bias(1).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn clipping_arithmetic() {
        // alpha=3.58, b_u=0.5, b_i=1.2, dot=0.4 gives 5.68, clipped to 5.
        let model = SvdModel {
            alpha: 3.58,
            n_factors: 1,
            clip_range: (1.0, 5.0),
            user_ids: vec![1],
            item_ids: vec![2],
            user_index: [(1u32, 0usize)].into_iter().collect(),
            item_index: [(2u32, 0usize)].into_iter().collect(),
            user_bias: vec![0.5],
            item_bias: vec![1.2],
            user_factors: vec![0.8],
            item_factors: vec![0.5],
        };
        let (raw, _) = model.predict_unclipped(1, 2);
        assert_abs_diff_eq!(raw, 5.68, epsilon = 1e-12);
        let (clipped, _) = model.predict(1, 2);
        assert_eq!(clipped, 5.0);
    }

    #[test]
    fn epoch_mse_descends_early_without_regularization() {
        let mut rng = RngStream::new(12, 0).rng();
        let data = synthetic_low_rank(60, 40, 5, 0.3, 0.1, 0.4, 3.0, (1.0, 5.0), &mut rng);
        let mut hp = small_hp(16, 6);
        hp.regularization = 1e-12;
        let (_, trace) = train_with_trace(&data, &hp, 5).unwrap();
        let mut violations = 0;
        for w in trace[..5.min(trace.len())].windows(2) {
            if w[1] > w[0] {
                violations += 1;
            }
        }
        assert!(violations <= 1, "trace {trace:?}");
    }

    #[test]
    fn sgd_step_matches_finite_difference_gradient() {
        // One rating, one epoch, negligible regularization: the applied
        // deltas must equal lr times the negative gradient of
        // 0.5 * (r - rhat)^2, checked against central finite differences.
        let mut rng = RngStream::new(77, 0).rng();
        for trial in 0..25u64 {
            let r = 1.0 + 4.0 * rng.random::<f64>();
            let data = vec![Rating::new(5, 9, r)];
            let mut hp = small_hp(3, 1);
            hp.regularization = 1e-300;
            let seed = 1000 + trial;

            let model = train(&data, &hp, seed).unwrap();
            // Reconstruct the initial factors from the same stream.
            let mut init_rng = RngStream::new(seed, 0).rng();
            let normal = Normal::new(0.0, hp.init_std).unwrap();
            let fu0: Vec<f64> = (0..3).map(|_| normal.sample(&mut init_rng)).collect();
            let fi0: Vec<f64> = (0..3).map(|_| normal.sample(&mut init_rng)).collect();
            let alpha = r; // mean of a single rating

            let loss = |bu: f64, bi: f64, fu: &[f64], fi: &[f64]| {
                let dot: f64 = fu.iter().zip(fi).map(|(a, b)| a * b).sum();
                let e = r - (alpha + bu + bi + dot);
                0.5 * e * e
            };
            let h = 1e-6;
            let lr = hp.learning_rate;

            let delta_bu = model.user_bias(5).unwrap();
            let fd_bu = (loss(h, 0.0, &fu0, &fi0) - loss(-h, 0.0, &fu0, &fi0)) / (2.0 * h);
            assert!(
                (delta_bu + lr * fd_bu).abs() <= 1e-4 * delta_bu.abs().max(1e-12),
                "trial {trial}: bias delta {delta_bu} vs fd {fd_bu}"
            );

            let mut fu_pert = fu0.clone();
            fu_pert[0] = fu0[0] + h;
            let up = loss(0.0, 0.0, &fu_pert, &fi0);
            fu_pert[0] = fu0[0] - h;
            let down = loss(0.0, 0.0, &fu_pert, &fi0);
            let fd_fu0 = (up - down) / (2.0 * h);
            let delta_fu0 = model.user_factor(5, 0).unwrap() - fu0[0];
            assert!(
                (delta_fu0 + lr * fd_fu0).abs() <= 1e-4 * delta_fu0.abs().max(1e-12),
                "trial {trial}: factor delta {delta_fu0} vs fd {fd_fu0}"
            );
        }
    }

    #[test]
    fn full_model_beats_bias_only_on_low_rank_data() {
        let mut rng = RngStream::new(4, 0).rng();
        let all = synthetic_low_rank(200, 100, 5, 0.3, 0.1, 0.5, 3.0, (1.0, 5.0), &mut rng);
        // Deterministic 80/20 split.
        let (train_idx, holdout_idx): (Vec<_>, Vec<_>) =
            all.iter().enumerate().partition(|(i, _)| i % 5 != 0);
        let train_set: Vec<Rating> = train_idx.into_iter().map(|(_, r)| *r).collect();
        let holdout: Vec<Rating> = holdout_idx.into_iter().map(|(_, r)| *r).collect();

        // The dataset is two orders of magnitude smaller than what the
        // default epoch count is tuned for; 100 epochs lets the factors
        // actually fit the rank-5 structure.
        let hp = Hyperparams {
            n_epochs: 100,
            ..Hyperparams::default()
        };
        let model = train(&train_set, &hp, 9).unwrap();
        let (rmse, share_full) = evaluate_rmse(&model, &holdout).unwrap();
        assert!(share_full > 0.95);

        let bias_rmse = bias_only_rmse(&train_set, &holdout, &hp);
        assert!(
            rmse <= 0.9 * bias_rmse,
            "full {rmse} vs bias-only {bias_rmse}"
        );
    }

    /// Independent bias-only baseline: the same SGD bias updates with no
    /// factor terms at all.
    fn bias_only_rmse(train_set: &[Rating], holdout: &[Rating], hp: &Hyperparams) -> f64 {
        let alpha = train_set.iter().map(|r| r.value).sum::<f64>() / train_set.len() as f64;
        let mut bu: HashMap<u32, f64> = HashMap::new();
        let mut bi: HashMap<u32, f64> = HashMap::new();
        for _ in 0..hp.n_epochs {
            for r in train_set {
                let u = bu.entry(r.user).or_insert(0.0);
                let i = bi.entry(r.item).or_insert(0.0);
                let e = r.value - (alpha + *u + *i);
                *u += hp.learning_rate * (e - hp.regularization * *u);
                *i += hp.learning_rate * (e - hp.regularization * *i);
            }
        }
        let mut ss = 0.0;
        for r in holdout {
            let pred = (alpha
                + bu.get(&r.user).copied().unwrap_or(0.0)
                + bi.get(&r.item).copied().unwrap_or(0.0))
            .clamp(hp.clip_range.0, hp.clip_range.1);
            ss += (pred - r.value) * (pred - r.value);
        }
        (ss / holdout.len() as f64).sqrt()
    }

    #[test]
    fn rmse_matches_two_pass_recomputation() {
        let mut rng = RngStream::new(30, 0).rng();
        let data = synthetic_low_rank(40, 30, 3, 0.4, 0.2, 0.4, 3.0, (1.0, 5.0), &mut rng);
        let model = train(&data[..data.len() / 2], &small_hp(8, 5), 2).unwrap();
        let holdout = &data[data.len() / 2..];
        let (rmse, _) = evaluate_rmse(&model, holdout).unwrap();
        // Two-pass oracle: collect squared errors first, sum afterwards.
        let sq: Vec<f64> = holdout
            .iter()
            .map(|r| {
                let (p, _) = model.predict(r.user, r.item);
                (p - r.value) * (p - r.value)
            })
            .collect();
        let oracle = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
        assert!((rmse - oracle).abs() < 1e-10);
    }

    #[test]
    fn evaluate_on_empty_holdout_is_an_error() {
        let data = vec![Rating::new(1, 1, 3.0)];
        let model = train(&data, &small_hp(2, 1), 0).unwrap();
        assert!(evaluate_rmse(&model, &[]).is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut rng = RngStream::new(61, 0).rng();
        let data = synthetic_low_rank(10, 8, 2, 0.5, 0.1, 0.4, 3.0, (1.0, 5.0), &mut rng);
        let model = train(&data, &small_hp(4, 3), 17).unwrap();
        let restored = SvdModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, restored);
    }

    #[test]
    fn model_parse_rejects_bad_containers() {
        assert!(SvdModel::from_json("{}").is_err());
        let garbage = r#"{"format":"svd-model","version":99,"alpha":0,"n_factors":1,
            "clip_min":1,"clip_max":5,"user_ids":[],"item_ids":[],"user_bias":[],
            "item_bias":[],"user_factors":[],"item_factors":[]}"#;
        assert!(SvdModel::from_json(garbage).is_err());
    }
}
