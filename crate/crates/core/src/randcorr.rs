//! Correlation-coefficient sampling and raw correlation-matrix assembly.
//!
//! Off-diagonal coefficients are drawn independently from a configurable
//! family and truncated to the open interval (-1, 1) by rejection. The
//! `sigma` parameter is always the scale of the *untruncated* distribution
//! (for Student's t, the scale of its limiting normal); no post-truncation
//! variance correction is applied.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, LogNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_PD_TOL};

/// Rejection attempts before a spec is declared degenerate.
const MAX_REJECTIONS: usize = 10_000;

/// A correlation-coefficient distribution family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Location-scale Student's t: `mean + sigma * t(dof)`, truncated.
    StudentT { mean: f64, sigma: f64, dof: f64 },
    /// Beta(shape1, shape2) draw recentered to `mean` by subtracting the
    /// analytical Beta mean, truncated.
    BetaRecentered {
        mean: f64,
        shape1: f64,
        shape2: f64,
    },
    /// Lognormal(0, log_sigma) draw recentered to `mean` by subtracting
    /// the analytical lognormal mean, truncated.
    LognormalRecentered { mean: f64, log_sigma: f64 },
    /// Degenerate distribution: every draw is exactly `mean`.
    PointMass { mean: f64 },
}

impl DistributionSpec {
    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::StudentT { mean, .. }
            | DistributionSpec::BetaRecentered { mean, .. }
            | DistributionSpec::LognormalRecentered { mean, .. }
            | DistributionSpec::PointMass { mean } => mean,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            DistributionSpec::StudentT { .. } => "student_t",
            DistributionSpec::BetaRecentered { .. } => "beta_recentered",
            DistributionSpec::LognormalRecentered { .. } => "lognormal_recentered",
            DistributionSpec::PointMass { .. } => "point_mass",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mean = self.mean();
        if !mean.is_finite() || mean <= -1.0 || mean >= 1.0 {
            return Err(Error::invalid_argument(format!(
                "correlation mean must lie in (-1, 1), got {mean}"
            )));
        }
        match *self {
            DistributionSpec::StudentT { sigma, dof, .. } => {
                let sigma_ok = sigma.is_finite() && sigma >= 0.0;
                if !sigma_ok {
                    return Err(Error::invalid_argument(format!(
                        "student_t sigma must be >= 0, got {sigma}"
                    )));
                }
                let dof_ok = dof.is_finite() && dof > 0.0;
                if !dof_ok {
                    return Err(Error::invalid_argument(format!(
                        "student_t dof must be > 0, got {dof}"
                    )));
                }
            }
            DistributionSpec::BetaRecentered { shape1, shape2, .. } => {
                let shapes_ok = shape1 > 0.0 && shape2 > 0.0;
                if !shapes_ok {
                    return Err(Error::invalid_argument(format!(
                        "beta_recentered shapes must be > 0, got ({shape1}, {shape2})"
                    )));
                }
            }
            DistributionSpec::LognormalRecentered { log_sigma, .. } => {
                let scale_ok = log_sigma.is_finite() && log_sigma > 0.0;
                if !scale_ok {
                    return Err(Error::invalid_argument(format!(
                        "lognormal_recentered log_sigma must be > 0, got {log_sigma}"
                    )));
                }
            }
            DistributionSpec::PointMass { .. } => {}
        }
        Ok(())
    }
}

/// Positive-definiteness status of a correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdStatus {
    PositiveDefinite,
    Repaired,
    NearSingular,
}

/// Symmetric unit-diagonal K x K matrix with entries in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: DMatrix<f64>,
    pd_status: PdStatus,
}

impl CorrelationMatrix {
    /// Validates the structural invariants and wraps the matrix.
    pub fn from_entries(entries: DMatrix<f64>, pd_status: PdStatus) -> Result<Self> {
        let dim = entries.nrows();
        if dim < 2 || entries.ncols() != dim {
            return Err(Error::validation(format!(
                "correlation matrix must be square with dim >= 2, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..dim {
            if entries[(i, i)] != 1.0 {
                return Err(Error::validation(format!(
                    "diagonal entry ({i},{i}) must be exactly 1, got {}",
                    entries[(i, i)]
                )));
            }
            for j in (i + 1)..dim {
                let v = entries[(i, j)];
                if entries[(j, i)].to_bits() != v.to_bits() {
                    return Err(Error::validation(format!(
                        "entries ({i},{j}) and ({j},{i}) are not bit-identical"
                    )));
                }
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::validation(format!(
                        "off-diagonal entry ({i},{j}) must lie in [-1, 1], got {v}"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            entries,
            pd_status,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: DMatrix::identity(dim, dim),
            pd_status: PdStatus::PositiveDefinite,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn pd_status(&self) -> PdStatus {
        self.pd_status
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Upper-triangle off-diagonal entries in row-major order.
    pub fn off_diagonals(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * (self.dim - 1) / 2);
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }
}

/// Draws one correlation coefficient from `spec`, rejection-sampled into
/// the open interval (-1, 1).
///
/// Fails with `DegenerateSpec` when the rejection loop exceeds its cap,
/// which signals a mean/scale combination incompatible with (-1, 1).
pub fn sample_correlation<R: Rng + ?Sized>(spec: &DistributionSpec, rng: &mut R) -> Result<f64> {
    spec.validate()?;
    match *spec {
        DistributionSpec::PointMass { mean } => Ok(mean),
        DistributionSpec::StudentT { mean, sigma, dof } => {
            let t = StudentT::new(dof)
                .map_err(|e| Error::invalid_argument(format!("student_t dof={dof}: {e}")))?;
            reject_into_open_interval(spec, rng, |rng| mean + sigma * t.sample(rng))
        }
        DistributionSpec::BetaRecentered {
            mean,
            shape1,
            shape2,
        } => {
            let beta = Beta::new(shape1, shape2).map_err(|e| {
                Error::invalid_argument(format!("beta shapes ({shape1},{shape2}): {e}"))
            })?;
            let beta_mean = shape1 / (shape1 + shape2);
            reject_into_open_interval(spec, rng, |rng| beta.sample(rng) - beta_mean + mean)
        }
        DistributionSpec::LognormalRecentered { mean, log_sigma } => {
            let ln = LogNormal::new(0.0, log_sigma)
                .map_err(|e| Error::invalid_argument(format!("lognormal sigma={log_sigma}: {e}")))?;
            let ln_mean = (log_sigma * log_sigma / 2.0).exp();
            reject_into_open_interval(spec, rng, |rng| ln.sample(rng) - ln_mean + mean)
        }
    }
}

fn reject_into_open_interval<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> f64,
) -> Result<f64> {
    for _ in 0..MAX_REJECTIONS {
        let x = draw(rng);
        if x > -1.0 && x < 1.0 {
            return Ok(x);
        }
    }
    Err(Error::DegenerateSpec(format!(
        "{} with mean {} produced {} consecutive draws outside (-1, 1)",
        spec.family_name(),
        spec.mean(),
        MAX_REJECTIONS
    )))
}

/// Draws a raw K x K correlation matrix: K(K-1)/2 independent coefficients
/// fill the upper triangle in row-major order, the matrix is symmetrized,
/// the diagonal set to 1, and `pd_status` set by [`is_positive_definite`].
pub fn draw_correlation_matrix<R: Rng + ?Sized>(
    k: usize,
    spec: &DistributionSpec,
    rng: &mut R,
) -> Result<CorrelationMatrix> {
    if k < 2 {
        return Err(Error::invalid_argument(format!(
            "matrix dimension must be >= 2, got {k}"
        )));
    }
    let mut entries = DMatrix::<f64>::identity(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let rho = sample_correlation(spec, rng)?;
            entries[(i, j)] = rho;
            entries[(j, i)] = rho;
        }
    }
    let pd = linalg::cholesky_with_pivot_tol(&entries, DEFAULT_PD_TOL).is_some();
    let status = if pd {
        PdStatus::PositiveDefinite
    } else {
        PdStatus::NearSingular
    };
    CorrelationMatrix::from_entries(entries, status)
}

/// True iff a Cholesky-style factorization succeeds with every pivot >= `tol`.
pub fn is_positive_definite(m: &CorrelationMatrix, tol: f64) -> bool {
    linalg::cholesky_with_pivot_tol(m.entries(), tol).is_some()
}
