//! Small dense linear-algebra helpers shared across modules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pivot threshold below which a symmetric matrix is treated as not
/// (strictly) positive definite.
pub const DEFAULT_PD_TOL: f64 = 1e-10;

/// Cholesky factorization that reports failure instead of panicking.
///
/// Returns the lower-triangular factor `L` with `L L' = m`, or `None` if any
/// pivot (the diagonal value before its square root) falls below `tol`.
pub fn cholesky_with_pivot_tol(m: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < tol || d.is_nan() {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L x = b` for lower-triangular `L` by forward substitution.
pub fn forward_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Copies the strict upper triangle onto the lower triangle so the matrix is
/// symmetric bit-exactly.
pub fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Symmetric eigendecomposition with a failure path carrying condition
/// diagnostics instead of a panic.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical(
            "eigendecomposition input contains non-finite entries",
        ));
    }
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| {
            let max_abs = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            Error::numerical(format!(
                "symmetric eigendecomposition failed to converge (dim={}, max|entry|={:.3e})",
                m.nrows(),
                max_abs
            ))
        })?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical(
            "eigendecomposition produced non-finite eigenvalues",
        ));
    }
    Ok((values, eig.eigenvectors))
}
