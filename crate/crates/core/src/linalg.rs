//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive-definite matrix.
///
/// Tries a Cholesky factorization first; on failure retries once with a
/// diagonal jitter of `1e-12 * trace`.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("expected square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let sym = symmetrize(m);
    if let Some(chol) = sym.clone().cholesky() {
        return Ok(symmetrize(&chol.inverse()));
    }
    let jitter = 1e-12 * sym.trace().abs().max(f64::MIN_POSITIVE);
    let n = sym.nrows();
    let jittered = sym + Matrix::identity(n, n) * jitter;
    jittered
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))
}

/// Symmetric square root `S` with `S S = m`, clamping negative eigenvalues to zero.
pub fn psd_sqrt(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(symmetrize(m));
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    symmetrize(&(v * Matrix::from_diagonal(&sqrt_vals) * v.transpose()))
}

/// True when `m` is symmetric within `1e-12` (relative to its scale) and has
/// no eigenvalue below `-1e-12 * trace`.
pub fn is_psd(m: &Matrix) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return false;
    }
    let tol = 1e-12 * m.trace().abs().max(f64::MIN_POSITIVE);
    SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().all(|&v| v >= -tol)
}

/// log-density of `N(mean, cov)` at `x`, with `cov` given by its inverse and log-determinant.
pub fn gaussian_log_density(x: &Vector, mean: &Vector, cov_inv: &Matrix, log_det: f64) -> f64 {
    let d = x - mean;
    let k = x.len() as f64;
    -0.5 * (k * (2.0 * std::f64::consts::PI).ln() + log_det + (d.transpose() * cov_inv * &d)[(0, 0)])
}

/// log-determinant of an SPD matrix via Cholesky.
pub fn spd_log_det(m: &Matrix) -> Result<f64> {
    let chol = symmetrize(m).cholesky().ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub(crate) fn check_square(name: &str, m: &Matrix, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!("{name} must be {n}x{n}, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}
