//! Conditional variance of a target given a growing predictor set.
//!
//! The residual variance after projecting the target on k predictors is
//! `1 - s' S^{-1} s`, where `s` collects the target/predictor correlations
//! and `S` is the predictor correlation block. The direct path solves
//! against a fresh Cholesky factor (with a generalized-inverse fallback
//! near singularity); the incremental path extends the factor one
//! row/column at a time in O(k^2) and audits itself against the direct
//! path at a configurable cadence.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::randcorr::CorrelationMatrix;

/// Pivot threshold below which the incremental extension falls back to the
/// generalized-inverse path.
pub const PIVOT_TOL: f64 = 1e-10;

/// Relative eigenvalue cutoff for the generalized inverse: eigenvalues
/// below `GINV_REL_TOL * lambda_max` are treated as zero.
pub const GINV_REL_TOL: f64 = 1e-10;

/// Default cadence (in extensions) of the self-audit against the direct path.
pub const DEFAULT_AUDIT_EVERY: usize = 25;

/// Drift bound that triggers a factorization rebuild during an audit.
const AUDIT_DRIFT_TOL: f64 = 1e-8;

/// Returns `1 - s' S^{-1} s` for the given target and predictor indices,
/// clamped into [0, 1].
///
/// Uses a Cholesky solve when every pivot clears [`PIVOT_TOL`]; otherwise
/// recomputes through an eigendecomposition-based generalized inverse.
pub fn conditional_variance_direct(
    sigma: &CorrelationMatrix,
    target: usize,
    predictors: &[usize],
) -> Result<f64> {
    validate_indices(sigma.dim(), target, predictors)?;
    if predictors.is_empty() {
        return Ok(1.0);
    }
    let k = predictors.len();
    let block = DMatrix::from_fn(k, k, |i, j| sigma.get(predictors[i], predictors[j]));
    let cross: Vec<f64> = predictors.iter().map(|&p| sigma.get(target, p)).collect();

    let r2 = match linalg::cholesky_with_pivot_tol(&block, PIVOT_TOL) {
        Some(l) => {
            let z = linalg::forward_solve(&l, &cross);
            z.iter().map(|v| v * v).sum::<f64>()
        }
        None => r_squared_generalized_inverse(&block, &cross)?,
    };
    Ok((1.0 - r2).clamp(0.0, 1.0))
}

fn r_squared_generalized_inverse(block: &DMatrix<f64>, cross: &[f64]) -> Result<f64> {
    let (values, vectors) = linalg::symmetric_eigen(block)?;
    let lambda_max = values.iter().copied().fold(0.0f64, f64::max);
    let cutoff = GINV_REL_TOL * lambda_max;
    let mut r2 = 0.0;
    for (e, &lam) in values.iter().enumerate() {
        if lam < cutoff {
            continue;
        }
        let proj: f64 = cross
            .iter()
            .enumerate()
            .map(|(i, &c)| c * vectors[(i, e)])
            .sum();
        r2 += proj * proj / lam;
    }
    Ok(r2)
}

fn validate_indices(dim: usize, target: usize, predictors: &[usize]) -> Result<()> {
    if target >= dim {
        return Err(Error::invalid_argument(format!(
            "target index {target} out of range for dim {dim}"
        )));
    }
    let mut seen = vec![false; dim];
    for &p in predictors {
        if p >= dim {
            return Err(Error::invalid_argument(format!(
                "predictor index {p} out of range for dim {dim}"
            )));
        }
        if p == target {
            return Err(Error::invalid_argument(format!(
                "predictor {p} equals the target"
            )));
        }
        if seen[p] {
            return Err(Error::invalid_argument(format!(
                "duplicate predictor index {p}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Incremental record of a conditioning computation.
///
/// Owns the growing Cholesky factor of the predictor block (packed
/// row-major lower triangle) and the partial solve against the
/// target/predictor correlations, so each extension costs O(k^2).
#[derive(Debug, Clone)]
pub struct ConditioningState {
    target: usize,
    predictors: Vec<usize>,
    factor: Factor,
    r2: f64,
    mse: f64,
    audit_every: usize,
    extensions_since_audit: usize,
}

#[derive(Debug, Clone)]
enum Factor {
    /// Packed lower-triangular factor rows and the solved cross vector
    /// z = L^{-1} s, so r2 = |z|^2.
    Cholesky { rows: Vec<Vec<f64>>, z: Vec<f64> },
    /// A pivot fell below tolerance; the predictor block is singular and
    /// stays singular under further extensions, so every subsequent value
    /// comes from the generalized-inverse path.
    Degenerate,
}

/// Starts a conditioning computation with an empty predictor set
/// (mse = 1, r2 = 0).
pub fn init_conditioning(sigma: &CorrelationMatrix, target: usize) -> Result<ConditioningState> {
    init_conditioning_with(sigma, target, DEFAULT_AUDIT_EVERY)
}

/// As [`init_conditioning`], with an explicit audit cadence.
pub fn init_conditioning_with(
    sigma: &CorrelationMatrix,
    target: usize,
    audit_every: usize,
) -> Result<ConditioningState> {
    validate_indices(sigma.dim(), target, &[])?;
    if audit_every == 0 {
        return Err(Error::invalid_argument("audit_every must be >= 1"));
    }
    Ok(ConditioningState {
        target,
        predictors: Vec::new(),
        factor: Factor::Cholesky {
            rows: Vec::new(),
            z: Vec::new(),
        },
        r2: 0.0,
        mse: 1.0,
        audit_every,
        extensions_since_audit: 0,
    })
}

impl ConditioningState {
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn predictors(&self) -> &[usize] {
        &self.predictors
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn mse(&self) -> f64 {
        self.mse
    }

    /// True when a pivot has fallen below tolerance and values now come
    /// from the generalized-inverse path.
    pub fn is_degenerate(&self) -> bool {
        matches!(self.factor, Factor::Degenerate)
    }
}

/// Adds one predictor to the conditioning set and updates mse/r2.
///
/// Extends the Cholesky factor by one row in O(k^2). Every `audit_every`
/// extensions the incremental value is checked against
/// [`conditional_variance_direct`]; drift beyond 1e-8 rebuilds the
/// factorization from scratch. A pivot below [`PIVOT_TOL`] switches the
/// state to the generalized-inverse path permanently.
pub fn extend_conditioning(
    state: &mut ConditioningState,
    sigma: &CorrelationMatrix,
    new_var: usize,
) -> Result<()> {
    if new_var >= sigma.dim() {
        return Err(Error::invalid_argument(format!(
            "new variable index {new_var} out of range for dim {}",
            sigma.dim()
        )));
    }
    if new_var == state.target || state.predictors.contains(&new_var) {
        return Err(Error::invalid_argument(format!(
            "variable {new_var} already used (target or predictor)"
        )));
    }

    match &mut state.factor {
        Factor::Degenerate => {
            state.predictors.push(new_var);
            state.mse = conditional_variance_direct(sigma, state.target, &state.predictors)?;
            state.r2 = 1.0 - state.mse;
            return Ok(());
        }
        Factor::Cholesky { rows, z } => {
            // New factor row: solve L w = S[predictors, new_var], then the
            // pivot is 1 - |w|^2 (unit diagonal).
            let k = state.predictors.len();
            let mut w = vec![0.0; k];
            for i in 0..k {
                let mut s = sigma.get(state.predictors[i], new_var);
                for j in 0..i {
                    s -= rows[i][j] * w[j];
                }
                w[i] = s / rows[i][i];
            }
            let pivot = 1.0 - w.iter().map(|v| v * v).sum::<f64>();
            if pivot < PIVOT_TOL {
                state.predictors.push(new_var);
                state.factor = Factor::Degenerate;
                state.mse = conditional_variance_direct(sigma, state.target, &state.predictors)?;
                state.r2 = 1.0 - state.mse;
                return Ok(());
            }
            let diag = pivot.sqrt();
            let cross = sigma.get(state.target, new_var);
            let z_new = (cross - w.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>()) / diag;
            let mut row = w;
            row.push(diag);
            rows.push(row);
            z.push(z_new);
            state.predictors.push(new_var);
            state.r2 = (state.r2 + z_new * z_new).clamp(0.0, 1.0);
            state.mse = (1.0 - state.r2).clamp(0.0, 1.0);
        }
    }

    state.extensions_since_audit += 1;
    if state.extensions_since_audit >= state.audit_every {
        state.extensions_since_audit = 0;
        let direct = conditional_variance_direct(sigma, state.target, &state.predictors)?;
        if (direct - state.mse).abs() > AUDIT_DRIFT_TOL {
            rebuild(state, sigma)?;
        }
    }
    Ok(())
}

/// Recomputes the factorization of the current predictor block from scratch.
fn rebuild(state: &mut ConditioningState, sigma: &CorrelationMatrix) -> Result<()> {
    let k = state.predictors.len();
    let block = DMatrix::from_fn(k, k, |i, j| {
        sigma.get(state.predictors[i], state.predictors[j])
    });
    match linalg::cholesky_with_pivot_tol(&block, PIVOT_TOL) {
        Some(l) => {
            let cross: Vec<f64> = state
                .predictors
                .iter()
                .map(|&p| sigma.get(state.target, p))
                .collect();
            let z = linalg::forward_solve(&l, &cross);
            let r2: f64 = z.iter().map(|v| v * v).sum();
            let mut rows = Vec::with_capacity(k);
            for i in 0..k {
                rows.push((0..=i).map(|j| l[(i, j)]).collect());
            }
            state.factor = Factor::Cholesky { rows, z };
            state.r2 = r2.clamp(0.0, 1.0);
            state.mse = (1.0 - state.r2).clamp(0.0, 1.0);
        }
        None => {
            state.factor = Factor::Degenerate;
            state.mse = conditional_variance_direct(sigma, state.target, &state.predictors)?;
            state.r2 = 1.0 - state.mse;
        }
    }
    Ok(())
}

/// Residual variance of the equicorrelation model: `1 - k rho^2 / (1 + (k-1) rho)`.
///
/// Closed form used as an exactness oracle for incremental sweeps.
pub fn equicorrelation_mse(rho: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let kf = k as f64;
    1.0 - kf * rho * rho / (1.0 + (kf - 1.0) * rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nearcorr::{nearest_correlation, ProjectionConfig};
    use crate::randcorr::{draw_correlation_matrix, DistributionSpec, PdStatus};
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::seq::SliceRandom;

    fn equicorrelation(k: usize, rho: f64) -> CorrelationMatrix {
        let mut m = DMatrix::<f64>::from_element(k, k, rho);
        for i in 0..k {
            m[(i, i)] = 1.0;
        }
        CorrelationMatrix::from_entries(m, PdStatus::PositiveDefinite).unwrap()
    }

    /// Draws a matrix and repairs it when needed, mimicking the simulation
    /// pipeline.
    fn repaired_matrix(k: usize, sigma: f64, seed: u64) -> CorrelationMatrix {
        let spec = DistributionSpec::StudentT {
            mean: 0.3,
            sigma,
            dof: 5.0,
        };
        let raw = draw_correlation_matrix(k, &spec, &mut RngStream::new(seed, 0).rng()).unwrap();
        if raw.pd_status() == PdStatus::PositiveDefinite {
            raw
        } else {
            nearest_correlation(raw.entries(), &ProjectionConfig::default())
                .unwrap()
                .matrix
        }
    }

    #[test]
    fn empty_predictor_set_has_unit_variance() {
        let m = equicorrelation(4, 0.3);
        assert_eq!(conditional_variance_direct(&m, 0, &[]).unwrap(), 1.0);
    }

    #[test]
    fn single_predictor_is_one_minus_rho_squared() {
        let m = equicorrelation(3, 0.6);
        let v = conditional_variance_direct(&m, 0, &[1]).unwrap();
        assert_abs_diff_eq!(v, 0.64, epsilon = 1e-14);
    }

    #[test]
    fn two_equicorrelated_predictors_match_closed_form() {
        let m = equicorrelation(4, 0.5);
        let v = conditional_variance_direct(&m, 0, &[1, 2]).unwrap();
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v, equicorrelation_mse(0.5, 2), epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_indices() {
        let m = equicorrelation(3, 0.2);
        assert!(conditional_variance_direct(&m, 3, &[0]).is_err());
        assert!(conditional_variance_direct(&m, 0, &[0]).is_err());
        assert!(conditional_variance_direct(&m, 0, &[1, 1]).is_err());
        assert!(conditional_variance_direct(&m, 0, &[5]).is_err());
    }

    #[test]
    fn init_state_examples() {
        let m = equicorrelation(5, 0.4);
        let s = init_conditioning(&m, 0).unwrap();
        assert_eq!(s.mse(), 1.0);
        assert_eq!(s.r2(), 0.0);
        assert_eq!(
            conditional_variance_direct(&m, 0, &[]).unwrap(),
            s.mse()
        );
        let s2 = init_conditioning(&m, 0).unwrap();
        assert_eq!(s.mse(), s2.mse());
        assert_eq!(s.predictors(), s2.predictors());
    }

    #[test]
    fn first_extension_gives_one_minus_rho_squared() {
        let m = equicorrelation(4, 0.5);
        let mut s = init_conditioning(&m, 0).unwrap();
        extend_conditioning(&mut s, &m, 2).unwrap();
        assert_abs_diff_eq!(s.mse(), 0.75, epsilon = 1e-14);
    }

    #[test]
    fn mse_is_monotone_under_extension() {
        let m = repaired_matrix(15, 0.3, 21);
        let mut s = init_conditioning(&m, 3).unwrap();
        let mut prev = s.mse();
        for v in (0..15).filter(|&v| v != 3) {
            extend_conditioning(&mut s, &m, v).unwrap();
            assert!(s.mse() <= prev + 1e-12, "mse rose: {prev} -> {}", s.mse());
            prev = s.mse();
        }
    }

    #[test]
    fn incremental_sweep_matches_direct_path() {
        let m = repaired_matrix(20, 0.4, 7);
        let mut s = init_conditioning(&m, 0).unwrap();
        let mut preds = Vec::new();
        for v in 1..20 {
            preds.push(v);
            extend_conditioning(&mut s, &m, v).unwrap();
            let direct = conditional_variance_direct(&m, 0, &preds).unwrap();
            assert!(
                (direct - s.mse()).abs() < 1e-8,
                "k={}: direct {direct} vs incremental {}",
                preds.len(),
                s.mse()
            );
        }
    }

    #[test]
    fn uncorrelated_predictor_leaves_mse_unchanged() {
        // Block-diagonal: variables {0,1} correlated, {2,3} correlated,
        // blocks mutually independent.
        let mut m = DMatrix::<f64>::identity(4, 4);
        for (i, j, v) in [(0usize, 1usize, 0.6), (2, 3, 0.5)] {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        let m = CorrelationMatrix::from_entries(m, PdStatus::PositiveDefinite).unwrap();
        let mut s = init_conditioning(&m, 0).unwrap();
        extend_conditioning(&mut s, &m, 1).unwrap();
        let before = s.mse();
        extend_conditioning(&mut s, &m, 2).unwrap();
        assert_abs_diff_eq!(s.mse(), before, epsilon = 1e-12);
        extend_conditioning(&mut s, &m, 3).unwrap();
        assert_abs_diff_eq!(s.mse(), before, epsilon = 1e-12);
    }

    #[test]
    fn endpoint_is_order_invariant() {
        let m = repaired_matrix(12, 0.5, 3);
        let mut rng = RngStream::new(50, 0).rng();
        let mut endpoints = Vec::new();
        for _ in 0..5 {
            let mut order: Vec<usize> = (1..12).collect();
            order.shuffle(&mut rng);
            let mut s = init_conditioning(&m, 0).unwrap();
            for v in order {
                extend_conditioning(&mut s, &m, v).unwrap();
            }
            endpoints.push(s.mse());
        }
        for e in &endpoints[1..] {
            assert!((e - endpoints[0]).abs() < 1e-8, "endpoints {endpoints:?}");
        }
    }

    #[test]
    fn singular_block_falls_back_to_generalized_inverse() {
        // Variables 1 and 2 perfectly correlated; conditioning on both must
        // not blow up and must match the single-predictor value.
        let mut m = DMatrix::<f64>::identity(4, 4);
        for (i, j, v) in [(0usize, 1usize, 0.6), (0, 2, 0.6), (1, 2, 1.0)] {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        let m = CorrelationMatrix::from_entries(m, PdStatus::NearSingular).unwrap();
        let mut s = init_conditioning(&m, 0).unwrap();
        extend_conditioning(&mut s, &m, 1).unwrap();
        extend_conditioning(&mut s, &m, 2).unwrap();
        assert!(s.is_degenerate());
        assert_abs_diff_eq!(s.mse(), 0.64, epsilon = 1e-10);
        // Further extensions keep working through the direct path.
        extend_conditioning(&mut s, &m, 3).unwrap();
        assert_abs_diff_eq!(s.mse(), 0.64, epsilon = 1e-10);
        let direct = conditional_variance_direct(&m, 0, &[1, 2, 3]).unwrap();
        assert_abs_diff_eq!(s.mse(), direct, epsilon = 1e-12);
    }

    #[test]
    fn clamps_near_perfect_prediction() {
        // Target nearly determined by two predictors; round-off must never
        // push mse outside [0, 1].
        let mut m = DMatrix::<f64>::identity(3, 3);
        let rho = 0.705;
        for (i, j, v) in [(0usize, 1usize, rho), (0, 2, rho), (1, 2, 0.0)] {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        let m = CorrelationMatrix::from_entries(m, PdStatus::PositiveDefinite).unwrap();
        let v = conditional_variance_direct(&m, 0, &[1, 2]).unwrap();
        assert!((0.0..=1.0).contains(&v));
        assert!(v < 1e-2);
    }
}
