//! End-to-end learning-trajectory simulation.
//!
//! One trajectory draws a random correlation matrix, repairs it to the
//! nearest correlation matrix when it is not positive definite, picks a
//! target variable, then adds the remaining variables one at a time in
//! random order, recording the conditional variance (MSE) after each
//! addition. Aggregation across trajectories produces the mean learning
//! curve, its curvature classification, and the Monte Carlo verification
//! of the mean-zero R-squared recursion.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condvar::{self, ConditioningState};
use crate::error::{Error, Result};
use crate::nearcorr::{nearest_correlation, ProjectionConfig};
use crate::randcorr::{draw_correlation_matrix, DistributionSpec, PdStatus};
use crate::rng::RngStream;
use crate::stats::{self, FiveNumber};

/// Default number of variables.
pub const DEFAULT_NUM_VARS: usize = 100;
/// Default number of trajectories.
pub const DEFAULT_NUM_TRAJECTORIES: usize = 100;
/// Default multiplier on the Monte Carlo standard error when banding
/// second differences.
pub const DEFAULT_BAND_MULTIPLIER: f64 = 2.0;
/// Default moving-average window for the smoothed second difference.
pub const DEFAULT_SMOOTH_WINDOW: usize = 5;
/// Curvature analysis stops where the mean curve drops below this fraction
/// of its starting value: at the MSE floor the curve must flatten out, so
/// convexity there says nothing about returns to scale.
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.1;
/// Default window width (in conditioning steps) for the gain-trend
/// contrasts.
pub const DEFAULT_GAIN_WINDOW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Variable count K; each trajectory has K-1 conditioning steps.
    pub num_vars: usize,
    /// Trajectory count N.
    pub num_trajectories: usize,
    pub spec: DistributionSpec,
    pub base_seed: u64,
    pub projection: ProjectionConfig,
    /// Cadence of the incremental-vs-direct self audit in `condvar`.
    pub audit_every: usize,
}

impl TrajectoryConfig {
    pub fn new(spec: DistributionSpec, base_seed: u64) -> Self {
        Self {
            num_vars: DEFAULT_NUM_VARS,
            num_trajectories: DEFAULT_NUM_TRAJECTORIES,
            spec,
            base_seed,
            projection: ProjectionConfig::default(),
            audit_every: condvar::DEFAULT_AUDIT_EVERY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_vars < 2 {
            return Err(Error::invalid_argument(format!(
                "K must be >= 2, got {}",
                self.num_vars
            )));
        }
        if self.num_trajectories < 1 {
            return Err(Error::invalid_argument(format!(
                "N must be >= 1, got {}",
                self.num_trajectories
            )));
        }
        self.spec.validate()?;
        self.projection.validate()
    }
}

/// Aggregated output of a simulation batch.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    /// N paths of length K-1: MSE after k = 1..K-1 predictors.
    pub mse_paths: Vec<Vec<f64>>,
    pub mean_curve: Vec<f64>,
    /// Sample std across paths divided by sqrt(N).
    pub stderr_curve: Vec<f64>,
    /// Trajectories whose matrix needed the nearest-correlation repair.
    pub repaired_count: usize,
    /// Quantiles of the off-diagonal correlations actually used
    /// (post-repair where repair was applied).
    pub corrected_offdiag_summary: FiveNumber,
}

/// Curvature classification of one point of the mean curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Second difference of the MSE curve significantly positive
    /// (convex MSE: each new variable helps less).
    DecreasingReturns,
    /// Second difference significantly negative (concave MSE).
    IncreasingReturns,
    Flat,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::DecreasingReturns => "decreasing_returns",
            Regime::IncreasingReturns => "increasing_returns",
            Regime::Flat => "flat",
        }
    }
}

/// Finite-difference analysis of the mean curve.
#[derive(Debug, Clone)]
pub struct RegimeReport {
    pub first_diffs: Vec<f64>,
    pub second_diffs: Vec<f64>,
    /// Tolerance band per second difference: multiplier times its Monte
    /// Carlo standard error.
    pub band: Vec<f64>,
    pub regimes: Vec<Regime>,
    /// Centered moving average of the second differences.
    pub smoothed_second_diffs: Vec<f64>,
    /// Band for the smoothed series, from per-path smoothed second diffs.
    pub smoothed_band: Vec<f64>,
    /// Index into `smoothed_second_diffs` of the first significant
    /// positive-to-negative sign change, if any.
    pub first_pos_to_neg: Option<usize>,
    /// First curve index where the mean dropped below the floor fraction
    /// of its starting value, if it did.
    pub floor_index: Option<usize>,
}

impl RegimeReport {
    /// Sign transitions of the smoothed second difference, considering only
    /// values outside the band. Entries are (index, from_sign, to_sign)
    /// with signs +1/-1.
    pub fn significant_sign_changes(&self) -> Vec<(usize, i8, i8)> {
        let mut out = Vec::new();
        let mut prev: Option<i8> = None;
        for (i, (&v, &b)) in self
            .smoothed_second_diffs
            .iter()
            .zip(self.smoothed_band.iter())
            .enumerate()
        {
            if v.abs() <= b {
                continue;
            }
            let sign = if v > 0.0 { 1 } else { -1 };
            if let Some(p) = prev {
                if p != sign {
                    out.push((i, p, sign));
                }
            }
            prev = Some(sign);
        }
        out
    }
}

/// One per-k comparison of the two sides of the mean-zero R-squared
/// recursion `E[R2_k] = k Var(rho) E[1 / (1 - R2_{k-1})]`.
#[derive(Debug, Clone, Copy)]
pub struct RecursionRecord {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_se: f64,
    pub rhs_se: f64,
    pub combined_se: f64,
    /// `|lhs - rhs| <= 3 * combined_se`.
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct RecursionReport {
    /// Sample variance of the pooled post-repair correlations.
    pub var_rho: f64,
    pub var_rho_se: f64,
    pub records: Vec<RecursionRecord>,
    /// Whether the k = 1 estimate matches `var_rho` within 3 combined SEs.
    pub k1_pass: bool,
}

struct TrajectoryData {
    mse_path: Vec<f64>,
    repaired: bool,
    offdiag: Vec<f64>,
}

/// Runs one trajectory and returns its MSE sequence for k = 1..K-1.
///
/// The trajectory's stream id is its index, so trajectories are
/// reproducible individually and independent of scheduling.
pub fn run_trajectory(cfg: &TrajectoryConfig, index: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    if index >= cfg.num_trajectories {
        return Err(Error::invalid_argument(format!(
            "trajectory index {index} out of range for N={}",
            cfg.num_trajectories
        )));
    }
    Ok(simulate_one(cfg, index, cfg.num_vars - 1)?.mse_path)
}

fn simulate_one(cfg: &TrajectoryConfig, index: usize, k_stop: usize) -> Result<TrajectoryData> {
    let run = || -> Result<TrajectoryData> {
        let mut rng = RngStream::new(cfg.base_seed, index as u64).rng();
        let raw = draw_correlation_matrix(cfg.num_vars, &cfg.spec, &mut rng)?;
        let (matrix, repaired) = if raw.pd_status() == PdStatus::PositiveDefinite {
            (raw, false)
        } else {
            (
                nearest_correlation(raw.entries(), &cfg.projection)?.matrix,
                true,
            )
        };

        // Target selection consumes the next draw of the stream; matrix
        // repair consumes none, so the order is draw, repair, select.
        let target = rng.random_range(0..cfg.num_vars);
        let mut remaining: Vec<usize> = (0..cfg.num_vars).filter(|&v| v != target).collect();

        let mut state: ConditioningState =
            condvar::init_conditioning_with(&matrix, target, cfg.audit_every)?;
        let mut mse_path = Vec::with_capacity(k_stop);
        for _ in 0..k_stop {
            let pick = rng.random_range(0..remaining.len());
            let var = remaining.remove(pick);
            condvar::extend_conditioning(&mut state, &matrix, var)?;
            mse_path.push(state.mse());
        }
        Ok(TrajectoryData {
            mse_path,
            repaired,
            offdiag: matrix.off_diagonals(),
        })
    };
    run().map_err(|e| e.in_trajectory(index))
}

/// Runs all N trajectories in parallel and aggregates deterministically in
/// index order.
pub fn run_simulation(cfg: &TrajectoryConfig) -> Result<TrajectoryResult> {
    cfg.validate()?;
    let k_stop = cfg.num_vars - 1;
    let runs: Vec<TrajectoryData> = (0..cfg.num_trajectories)
        .into_par_iter()
        .map(|i| simulate_one(cfg, i, k_stop))
        .collect::<Result<Vec<_>>>()?;

    let mut mse_paths = Vec::with_capacity(runs.len());
    let mut offdiag = Vec::new();
    let mut repaired_count = 0;
    for run in &runs {
        mse_paths.push(run.mse_path.clone());
        offdiag.extend_from_slice(&run.offdiag);
        if run.repaired {
            repaired_count += 1;
        }
    }

    let (mean_curve, stderr_curve) = aggregate_curves(&mse_paths, k_stop);
    Ok(TrajectoryResult {
        mse_paths,
        mean_curve,
        stderr_curve,
        repaired_count,
        corrected_offdiag_summary: stats::five_number_summary(&offdiag),
    })
}

fn aggregate_curves(paths: &[Vec<f64>], len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(paths.len());
    for k in 0..len {
        column.clear();
        column.extend(paths.iter().map(|p| p[k]));
        mean.push(stats::mean(&column));
        stderr.push(stats::standard_error(&column));
    }
    (mean, stderr)
}

/// Classifies returns-to-scale regimes along the mean curve with the
/// default band multiplier, smoothing window, and floor fraction.
pub fn classify_returns(result: &TrajectoryResult) -> Result<RegimeReport> {
    classify_returns_with(
        result,
        DEFAULT_BAND_MULTIPLIER,
        DEFAULT_SMOOTH_WINDOW,
        DEFAULT_FLOOR_FRACTION,
    )
}

/// As [`classify_returns`] with explicit banding, smoothing, and floor
/// constants.
pub fn classify_returns_with(
    result: &TrajectoryResult,
    band_multiplier: f64,
    smooth_window: usize,
    floor_fraction: f64,
) -> Result<RegimeReport> {
    let len = result.mean_curve.len();
    if len < 3 {
        // K - 1 curve points require K >= 4 for one second difference.
        return Err(Error::invalid_argument(format!(
            "regime classification needs K >= 4, got a curve of {len} points"
        )));
    }
    if smooth_window == 0 {
        return Err(Error::invalid_argument("smooth window must be >= 1"));
    }

    let n = result.mse_paths.len();
    let first_diffs = stats::first_differences(&result.mean_curve);
    let second_diffs = stats::second_differences(&result.mean_curve);

    // Per-path second differences give the Monte Carlo standard error of the
    // mean curve's second difference at each interior k.
    let path_second: Vec<Vec<f64>> = result
        .mse_paths
        .iter()
        .map(|p| stats::second_differences(p))
        .collect();
    let band: Vec<f64> = se_across_paths(&path_second, second_diffs.len(), n)
        .into_iter()
        .map(|se| band_multiplier * se)
        .collect();

    let regimes: Vec<Regime> = second_diffs
        .iter()
        .zip(band.iter())
        .map(|(&sd, &b)| {
            if sd > b {
                Regime::DecreasingReturns
            } else if sd < -b {
                Regime::IncreasingReturns
            } else {
                Regime::Flat
            }
        })
        .collect();

    let smoothed_second_diffs = stats::moving_average(&second_diffs, smooth_window);
    let path_smoothed: Vec<Vec<f64>> = path_second
        .iter()
        .map(|sd| stats::moving_average(sd, smooth_window))
        .collect();
    let smoothed_band: Vec<f64> = se_across_paths(&path_smoothed, second_diffs.len(), n)
        .into_iter()
        .map(|se| band_multiplier * se)
        .collect();

    let report = RegimeReport {
        first_diffs,
        second_diffs,
        band,
        regimes,
        first_pos_to_neg: None,
        smoothed_second_diffs,
        smoothed_band,
        floor_index: floor_index(&result.mean_curve, floor_fraction),
    };
    let first_pos_to_neg = report
        .significant_sign_changes()
        .into_iter()
        .find(|&(_, from, to)| from > 0 && to < 0)
        .map(|(i, _, _)| i);
    Ok(RegimeReport {
        first_pos_to_neg,
        ..report
    })
}

/// First index of `curve` below `fraction * curve[0]`.
fn floor_index(curve: &[f64], fraction: f64) -> Option<usize> {
    if curve.is_empty() || fraction <= 0.0 {
        return None;
    }
    let cut = fraction * curve[0];
    curve.iter().position(|&m| m < cut)
}

fn se_across_paths(per_path: &[Vec<f64>], len: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(n);
    for k in 0..len {
        column.clear();
        column.extend(per_path.iter().map(|p| p[k]));
        out.push(stats::standard_error(&column));
    }
    out
}

/// Mean per-step gain inside one window of conditioning steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainWindowStat {
    /// First conditioning step k covered by the window.
    pub first_k: usize,
    /// Last conditioning step k covered by the window.
    pub last_k: usize,
    pub mean_gain: f64,
}

/// Window-level trend of the per-step MSE gains, used to detect the
/// decreasing-then-increasing returns switch with Monte Carlo power that
/// per-k second differences do not have.
///
/// A positive smoothed second difference means gains are shrinking, so the
/// single positive-to-negative sign change of the second difference is
/// equivalent to the gain curve having one interior trough: a significant
/// decline into the minimum-gain window and a significant rebound out of
/// it, with no significant re-shrink afterwards before the MSE floor.
#[derive(Debug, Clone)]
pub struct GainTrendReport {
    pub windows: Vec<GainWindowStat>,
    pub floor_index: Option<usize>,
    /// Window with the smallest mean gain.
    pub trough: usize,
    /// Paired z-statistic of (trough gain - first-window gain).
    pub decline_z: f64,
    /// Best post-trough window and the z-statistic of its gain rebound.
    pub rebound: Option<(usize, f64)>,
    /// Smallest z among contrasts of the rebound window against later
    /// pre-floor windows; +inf when no later window exists.
    pub collapse_z: f64,
}

impl GainTrendReport {
    /// True when the gain curve shows exactly one significant trend switch
    /// at the given z threshold: shrinking gains, then growing gains, and
    /// no significant re-shrink before the floor.
    pub fn single_switch(&self, z_crit: f64) -> bool {
        matches!(self.rebound, Some((_, z)) if z > z_crit)
            && self.decline_z < -z_crit
            && self.collapse_z > -z_crit
    }
}

/// Computes the windowed gain trend with the default floor fraction and
/// window width.
pub fn analyze_gain_trend(result: &TrajectoryResult) -> Result<GainTrendReport> {
    analyze_gain_trend_with(result, DEFAULT_FLOOR_FRACTION, DEFAULT_GAIN_WINDOW)
}

/// As [`analyze_gain_trend`] with explicit floor fraction and window width.
pub fn analyze_gain_trend_with(
    result: &TrajectoryResult,
    floor_fraction: f64,
    window: usize,
) -> Result<GainTrendReport> {
    if window < 1 {
        return Err(Error::invalid_argument("gain window must be >= 1"));
    }
    let curve_len = result.mean_curve.len();
    let floor = floor_index(&result.mean_curve, floor_fraction);
    // Gains g_k = mse_{k-1} - mse_k exist for k = 1..=curve_len; restrict
    // to the pre-floor region.
    let n_gains = floor.unwrap_or(curve_len);
    let n_windows = n_gains / window;
    if n_windows < 3 {
        return Err(Error::invalid_argument(format!(
            "gain trend needs at least 3 windows, got {n_windows} \
             ({n_gains} pre-floor steps at window {window})"
        )));
    }
    // Window i covers gain indices [i*window, end); the last window absorbs
    // the remainder so the strongest late gains are not dropped.
    let bounds: Vec<(usize, usize)> = (0..n_windows)
        .map(|i| {
            let a = i * window;
            let b = if i + 1 == n_windows { n_gains } else { a + window };
            (a, b)
        })
        .collect();

    let window_gain = |path: &[f64], (a, b): (usize, usize)| -> f64 {
        // Gains telescope: the window mean depends only on the endpoints.
        let start = if a == 0 { 1.0 } else { path[a - 1] };
        (start - path[b - 1]) / (b - a) as f64
    };
    let paired_z = |wa: (usize, usize), wb: (usize, usize)| -> f64 {
        let deltas: Vec<f64> = result
            .mse_paths
            .iter()
            .map(|p| window_gain(p, wb) - window_gain(p, wa))
            .collect();
        let mean = stats::mean(&deltas);
        let se = stats::standard_error(&deltas);
        if se > 0.0 {
            mean / se
        } else if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        }
    };

    let windows: Vec<GainWindowStat> = bounds
        .iter()
        .map(|&(a, b)| {
            let gains: Vec<f64> = result
                .mse_paths
                .iter()
                .map(|p| window_gain(p, (a, b)))
                .collect();
            GainWindowStat {
                first_k: a + 1,
                last_k: b,
                mean_gain: stats::mean(&gains),
            }
        })
        .collect();

    let trough = windows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mean_gain.total_cmp(&b.1.mean_gain))
        .map(|(i, _)| i)
        .unwrap();

    let decline_z = if trough > 0 {
        paired_z(bounds[0], bounds[trough])
    } else {
        f64::INFINITY // no decline phase at all
    };

    let mut rebound: Option<(usize, f64)> = None;
    for later in trough + 1..n_windows {
        let z = paired_z(bounds[trough], bounds[later]);
        if rebound.is_none_or(|(_, best)| z > best) {
            rebound = Some((later, z));
        }
    }
    let collapse_z = match rebound {
        Some((w, _)) => (w + 1..n_windows)
            .map(|later| paired_z(bounds[w], bounds[later]))
            .fold(f64::INFINITY, f64::min),
        None => f64::INFINITY,
    };

    Ok(GainTrendReport {
        windows,
        floor_index: floor,
        trough,
        decline_z,
        rebound,
        collapse_z,
    })
}

/// Monte Carlo verification of the mean-zero recursion
/// `E[R2_k] = k Var(rho) E[1 / (1 - R2_{k-1})]` for k = 1..k_max.
///
/// Runs fresh trajectories so both sides are estimated from the same draws,
/// which couples them per draw and shrinks the comparison variance.
/// `Var(rho)` is estimated from the correlations actually used, i.e. after
/// any nearest-correlation repair.
pub fn verify_recursion(cfg: &TrajectoryConfig, k_max: usize) -> Result<RecursionReport> {
    cfg.validate()?;
    if cfg.spec.mean() != 0.0 {
        return Err(Error::invalid_argument(format!(
            "the recursion check requires a mean-zero correlation distribution, got mean {}",
            cfg.spec.mean()
        )));
    }
    if k_max < 1 || k_max > cfg.num_vars - 1 {
        return Err(Error::invalid_argument(format!(
            "k_max must lie in [1, K-1] = [1, {}], got {k_max}",
            cfg.num_vars - 1
        )));
    }

    let runs: Vec<TrajectoryData> = (0..cfg.num_trajectories)
        .into_par_iter()
        .map(|i| simulate_one(cfg, i, k_max))
        .collect::<Result<Vec<_>>>()?;

    let mut pooled = Vec::new();
    for run in &runs {
        pooled.extend_from_slice(&run.offdiag);
    }
    let (var_rho, var_rho_se) = variance_with_se(&pooled);

    let mut records = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        // R2 at step k of each trajectory; 1/(1 - R2) at step k-1, defined
        // as 1 for the empty conditioning set.
        let r2_k: Vec<f64> = runs.iter().map(|r| 1.0 - r.mse_path[k - 1]).collect();
        let inv_prev: Vec<f64> = runs
            .iter()
            .map(|r| {
                let mse_prev = if k == 1 { 1.0 } else { r.mse_path[k - 2] };
                1.0 / mse_prev
            })
            .collect();
        let lhs = stats::mean(&r2_k);
        let lhs_se = stats::standard_error(&r2_k);
        let scale = k as f64 * var_rho;
        let rhs = scale * stats::mean(&inv_prev);
        let rhs_se = scale * stats::standard_error(&inv_prev);
        let combined_se = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
        let pass = (lhs - rhs).abs() <= 3.0 * combined_se;
        records.push(RecursionRecord {
            k,
            lhs,
            rhs,
            lhs_se,
            rhs_se,
            combined_se,
            pass,
        });
    }

    let k1 = records[0];
    let k1_se = (k1.lhs_se * k1.lhs_se + var_rho_se * var_rho_se).sqrt();
    let k1_pass = (k1.lhs - var_rho).abs() <= 3.0 * k1_se;

    Ok(RecursionReport {
        var_rho,
        var_rho_se,
        records,
        k1_pass,
    })
}

/// Sample variance and the standard error of that variance estimate
/// (via the fourth central moment).
fn variance_with_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m < 2 {
        return (0.0, 0.0);
    }
    let mean = stats::mean(values);
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    let var = m2 / (m - 1) as f64;
    m2 /= m as f64;
    m4 /= m as f64;
    let se = ((m4 - m2 * m2).max(0.0) / m as f64).sqrt();
    (var, se)
}

/// Explained variance of the equicorrelation model evaluated at the mean
/// correlation: `R2(k) = k rho^2 / (1 + (k-1) rho)` for k = 1..k_max.
///
/// Its k = 1 value is `rho^2` and its k = 2 value is
/// `(2 rho^2 - 2 rho^3) / (1 - rho^2)`.
pub fn theory_mean_curve(rho_bar: f64, k_max: usize) -> Result<Vec<f64>> {
    if !rho_bar.is_finite() || !(0.0..1.0).contains(&rho_bar) {
        return Err(Error::invalid_argument(format!(
            "rho_bar must lie in [0, 1), got {rho_bar}"
        )));
    }
    Ok((1..=k_max)
        .map(|k| 1.0 - condvar::equicorrelation_mse(rho_bar, k))
        .collect())
}

/// Partial correlation between any pair of conditioning variables at the
/// mean correlation: `rho / (1 + (k-2) rho)` for k >= 2.
pub fn partial_correlation_at_mean(rho_bar: f64, k: usize) -> Result<f64> {
    if !rho_bar.is_finite() || !(0.0 < rho_bar && rho_bar < 1.0) {
        return Err(Error::invalid_argument(format!(
            "rho_bar must lie in (0, 1), got {rho_bar}"
        )));
    }
    if k < 2 {
        return Err(Error::invalid_argument(format!("k must be >= 2, got {k}")));
    }
    Ok(rho_bar / (1.0 + (k - 2) as f64 * rho_bar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn point_mass_cfg(mean: f64, k: usize, n: usize) -> TrajectoryConfig {
        let mut cfg = TrajectoryConfig::new(DistributionSpec::PointMass { mean }, 7);
        cfg.num_vars = k;
        cfg.num_trajectories = n;
        cfg
    }

    #[test]
    fn zero_information_path_stays_at_one() {
        let cfg = point_mass_cfg(0.0, 20, 1);
        let path = run_trajectory(&cfg, 0).unwrap();
        assert_eq!(path.len(), 19);
        for v in path {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn equicorrelation_path_matches_closed_form() {
        let cfg = point_mass_cfg(0.5, 100, 1);
        let path = run_trajectory(&cfg, 0).unwrap();
        for (i, v) in path.iter().enumerate() {
            let k = i + 1;
            let expected = condvar::equicorrelation_mse(0.5, k);
            assert!((v - expected).abs() < 1e-10, "k={k}: {v} vs {expected}");
        }
        // At the mean correlation: R2(1) = rho^2 = 0.25 and R2(2) = 1/3.
        assert_abs_diff_eq!(1.0 - path[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 - path[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let mut cfg = point_mass_cfg(0.0, 12, 3);
        cfg.spec = DistributionSpec::StudentT {
            mean: 0.2,
            sigma: 0.2,
            dof: 1000.0,
        };
        let a = run_trajectory(&cfg, 1).unwrap();
        let b = run_trajectory(&cfg, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_trajectory_aggregation() {
        let mut cfg = point_mass_cfg(0.0, 10, 1);
        cfg.spec = DistributionSpec::StudentT {
            mean: 0.0,
            sigma: 0.3,
            dof: 1000.0,
        };
        let res = run_simulation(&cfg).unwrap();
        assert_eq!(res.mse_paths.len(), 1);
        assert_eq!(res.mean_curve, res.mse_paths[0]);
        assert!(res.stderr_curve.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn point_mass_paths_are_identical() {
        let cfg = point_mass_cfg(0.5, 10, 5);
        let res = run_simulation(&cfg).unwrap();
        for p in &res.mse_paths[1..] {
            assert_eq!(p, &res.mse_paths[0]);
        }
        assert_eq!(res.repaired_count, 0);
        assert_eq!(res.corrected_offdiag_summary.min, 0.5);
        assert_eq!(res.corrected_offdiag_summary.max, 0.5);
    }

    #[test]
    fn paths_are_monotone_and_bounded() {
        let mut cfg = point_mass_cfg(0.0, 30, 8);
        cfg.spec = DistributionSpec::StudentT {
            mean: 0.4,
            sigma: 0.2,
            dof: 5.0,
        };
        let res = run_simulation(&cfg).unwrap();
        for p in &res.mse_paths {
            let mut prev = 1.0;
            for &v in p {
                assert!((0.0..=1.0).contains(&v));
                assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn aggregation_is_independent_of_thread_schedule() {
        let mut cfg = point_mass_cfg(0.0, 15, 6);
        cfg.spec = DistributionSpec::StudentT {
            mean: 0.3,
            sigma: 0.25,
            dof: 1000.0,
        };
        let a = run_simulation(&cfg).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = single.install(|| run_simulation(&cfg)).unwrap();
        assert_eq!(a.mean_curve, b.mean_curve);
        assert_eq!(a.stderr_curve, b.stderr_curve);
        assert_eq!(a.mse_paths, b.mse_paths);
    }

    #[test]
    fn linear_curve_is_flat_everywhere() {
        // Power-of-two slope keeps the line exact in floating point.
        let paths = vec![(0..10).map(|k| 1.0 - 0.0625 * k as f64).collect::<Vec<_>>(); 3];
        let (mean_curve, stderr_curve) = aggregate_curves(&paths, 10);
        let res = TrajectoryResult {
            mse_paths: paths,
            mean_curve,
            stderr_curve,
            repaired_count: 0,
            corrected_offdiag_summary: stats::five_number_summary(&[0.0]),
        };
        let report = classify_returns(&res).unwrap();
        assert!(report.regimes.iter().all(|r| *r == Regime::Flat));
        assert!(report.first_pos_to_neg.is_none());
    }

    #[test]
    fn convex_decreasing_curve_reports_decreasing_returns() {
        // MSE ~ 1/(k+1) is convex decreasing: positive second differences.
        let path: Vec<f64> = (1..12).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        let paths = vec![path; 2];
        let (mean_curve, stderr_curve) = aggregate_curves(&paths, 11);
        let res = TrajectoryResult {
            mse_paths: paths,
            mean_curve,
            stderr_curve,
            repaired_count: 0,
            corrected_offdiag_summary: stats::five_number_summary(&[0.0]),
        };
        let report = classify_returns(&res).unwrap();
        assert!(report
            .regimes
            .iter()
            .all(|r| *r == Regime::DecreasingReturns));
    }

    #[test]
    fn equicorrelation_result_is_globally_decreasing_returns() {
        let cfg = point_mass_cfg(0.5, 40, 3);
        let res = run_simulation(&cfg).unwrap();
        let report = classify_returns(&res).unwrap();
        assert!(report
            .regimes
            .iter()
            .all(|r| *r == Regime::DecreasingReturns));
        // Simulated curve equals the complement of the theory curve.
        let theory = theory_mean_curve(0.5, 39).unwrap();
        for (m, t) in res.mean_curve.iter().zip(theory.iter()) {
            assert!((m - (1.0 - t)).abs() < 1e-10);
        }
    }

    #[test]
    fn gain_trend_finds_no_switch_on_monotone_regimes() {
        // Point mass at 0.5: gains shrink globally, so the trough is the
        // final window and no switch exists.
        let cfg = point_mass_cfg(0.5, 60, 4);
        let res = run_simulation(&cfg).unwrap();
        let trend = analyze_gain_trend(&res).unwrap();
        assert_eq!(trend.trough, trend.windows.len() - 1);
        assert!(trend.rebound.is_none());
        assert!(!trend.single_switch(2.0));

        // Mean-zero: gains grow globally. The empirical trough can land a
        // window or two in from noise, but any decline into it must stay
        // insignificant.
        let mut cfg = TrajectoryConfig::new(
            DistributionSpec::StudentT {
                mean: 0.0,
                sigma: 0.08,
                dof: 1000.0,
            },
            5,
        );
        cfg.num_vars = 60;
        cfg.num_trajectories = 30;
        let res = run_simulation(&cfg).unwrap();
        let trend = analyze_gain_trend(&res).unwrap();
        assert!(!trend.single_switch(2.0), "decline_z={}", trend.decline_z);
    }

    #[test]
    fn gain_trend_detects_the_regime_switch() {
        let mut cfg = TrajectoryConfig::new(
            DistributionSpec::StudentT {
                mean: 0.5,
                sigma: 0.05,
                dof: 1000.0,
            },
            2024,
        );
        cfg.num_vars = 80;
        cfg.num_trajectories = 60;
        let res = run_simulation(&cfg).unwrap();
        let trend = analyze_gain_trend(&res).unwrap();
        assert!(
            trend.single_switch(2.0),
            "decline_z={} rebound={:?} collapse_z={}",
            trend.decline_z,
            trend.rebound,
            trend.collapse_z
        );
        let (_, z) = trend.rebound.unwrap();
        assert!(z > 2.0);
        assert!(trend.trough > 0);
    }

    #[test]
    fn regime_floor_is_detected_on_saturating_curves() {
        let mut cfg = TrajectoryConfig::new(
            DistributionSpec::StudentT {
                mean: 0.5,
                sigma: 0.1,
                dof: 1000.0,
            },
            7,
        );
        cfg.num_vars = 80;
        cfg.num_trajectories = 20;
        let res = run_simulation(&cfg).unwrap();
        let rep = classify_returns(&res).unwrap();
        let floor = rep.floor_index.expect("sigma=0.1 curves reach the floor");
        assert!(res.mean_curve[floor] < 0.1 * res.mean_curve[0]);
        assert!(res.mean_curve[floor - 1] >= 0.1 * res.mean_curve[0]);
    }

    #[test]
    fn recursion_requires_mean_zero() {
        let cfg = point_mass_cfg(0.5, 10, 2);
        let err = verify_recursion(&cfg, 3).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn recursion_is_trivial_for_zero_point_mass() {
        let cfg = point_mass_cfg(0.0, 10, 4);
        let report = verify_recursion(&cfg, 5).unwrap();
        assert_eq!(report.var_rho, 0.0);
        for rec in &report.records {
            assert_eq!(rec.lhs, 0.0);
            assert_eq!(rec.rhs, 0.0);
            assert!(rec.pass);
        }
        assert!(report.k1_pass);
    }

    #[test]
    fn recursion_holds_at_desk_scale() {
        let mut cfg = TrajectoryConfig::new(
            DistributionSpec::StudentT {
                mean: 0.0,
                sigma: 0.1,
                dof: 1000.0,
            },
            13,
        );
        cfg.num_vars = 40;
        cfg.num_trajectories = 150;
        let report = verify_recursion(&cfg, 5).unwrap();
        assert!(report.k1_pass, "k=1: {:?}", report.records[0]);
        for rec in &report.records {
            assert!(rec.pass, "k={}: {rec:?}", rec.k);
        }
    }

    #[test]
    fn theory_curve_values() {
        let curve = theory_mean_curve(0.5, 3).unwrap();
        assert_abs_diff_eq!(curve[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(curve[1], 1.0 / 3.0, epsilon = 1e-15);
        let zeros = theory_mean_curve(0.0, 5).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));
        assert!(theory_mean_curve(1.0, 3).is_err());
    }

    #[test]
    fn partial_correlation_values() {
        assert_abs_diff_eq!(
            partial_correlation_at_mean(0.5, 2).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            partial_correlation_at_mean(0.5, 4).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        // Strictly decreasing in k, vanishing for large k.
        let mut prev = f64::INFINITY;
        for k in 2..200 {
            let v = partial_correlation_at_mean(0.3, k).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-2);
        assert!(partial_correlation_at_mean(0.5, 1).is_err());
    }

    #[test]
    fn failing_trajectory_carries_its_index() {
        // A spec that cannot produce draws inside (-1, 1).
        let mut cfg = TrajectoryConfig::new(
            DistributionSpec::LognormalRecentered {
                mean: 0.9,
                log_sigma: 10.0,
            },
            3,
        );
        cfg.num_vars = 4;
        cfg.num_trajectories = 2;
        let err = run_simulation(&cfg).unwrap_err();
        assert!(matches!(err, Error::Trajectory { .. }), "{err}");
    }
}
