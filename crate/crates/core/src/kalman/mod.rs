//! Exact linear-Gaussian machinery.
//!
//! This is the reference layer the particle filters are checked against:
//! the Kalman recursion in both information and gain form, the stationary
//! closed form, the bandwidth-perturbed recursion with its closed-form
//! solution, the resulting fixed points, and the asymptotic ESS laws.

mod asymptotics;
pub mod checks;
mod perturbed;

pub use asymptotics::{
    asymptotic_rmse_bound, beta_crit, ess_asymptotic, optimal_rate_check, periodic_band, periodic_fixed_point,
    predicted_spacings, rpf_fixed_point, OptimalRateReport,
};
pub use perturbed::{
    lemma_closed_form, lemma_covariance_path, perturbed_recursion_step, stationary_closed_form, AlphaSequence,
};

use crate::error::{Error, Result};
use crate::linalg::{check_square, spd_inverse, symmetrize, Matrix, Vector};
use crate::models::GaussianBelief;

/// Prediction step: `mean' = A mean`, `cov' = A cov Aᵀ + Q`.
pub fn kalman_predict(belief: &GaussianBelief, a: &Matrix, q: &Matrix) -> Result<GaussianBelief> {
    let d = belief.dim();
    check_square("A", a, d)?;
    check_square("Q", q, d)?;
    Ok(GaussianBelief { mean: a * &belief.mean, cov: symmetrize(&(a * &belief.cov * a.transpose() + q)) })
}

fn check_update_dims(pred: &GaussianBelief, y: &Vector, b: &Matrix, r: &Matrix) -> Result<()> {
    if b.ncols() != pred.dim() {
        return Err(Error::Dimension(format!("B has {} columns, state has {}", b.ncols(), pred.dim())));
    }
    if y.len() != b.nrows() {
        return Err(Error::Dimension(format!("observation has length {}, B has {} rows", y.len(), b.nrows())));
    }
    check_square("R", r, b.nrows())
}

/// Update step in information form:
/// `Σ⁻¹ = Σ_pred⁻¹ + Bᵀ R⁻¹ B`, `Σ⁻¹ μ = Σ_pred⁻¹ μ_pred + Bᵀ R⁻¹ y`.
pub fn kalman_update(pred: &GaussianBelief, y: &Vector, b: &Matrix, r: &Matrix) -> Result<GaussianBelief> {
    check_update_dims(pred, y, b, r)?;
    let r_inv = spd_inverse(r)?;
    let pred_info = symmetrize(&pred.cov)
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| Error::Singular("predicted covariance is singular; use the gain form".into()))?;
    let info = symmetrize(&(&pred_info + b.transpose() * &r_inv * b));
    let cov = spd_inverse(&info).map_err(|_| Error::Singular("posterior information matrix is singular".into()))?;
    let mean = &cov * (&pred_info * &pred.mean + b.transpose() * &r_inv * y);
    Ok(GaussianBelief { mean, cov })
}

/// Update step in gain form: `K = Σ_pred Bᵀ (B Σ_pred Bᵀ + R)⁻¹`, `Σ = (I − K B) Σ_pred`.
pub fn kalman_update_gain(pred: &GaussianBelief, y: &Vector, b: &Matrix, r: &Matrix) -> Result<GaussianBelief> {
    check_update_dims(pred, y, b, r)?;
    let innovation_cov = b * &pred.cov * b.transpose() + r;
    let gain = &pred.cov * b.transpose() * spd_inverse(&innovation_cov)?;
    let d = pred.dim();
    let mean = &pred.mean + &gain * (y - b * &pred.mean);
    let cov = symmetrize(&((Matrix::identity(d, d) - &gain * b) * &pred.cov));
    Ok(GaussianBelief { mean, cov })
}

/// Running Kalman filter over a time-invariant linear-Gaussian model.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub belief: GaussianBelief,
    pub step: usize,
}

impl KalmanState {
    pub fn new(prior: GaussianBelief) -> Self {
        Self { belief: prior, step: 0 }
    }

    /// Predicts with `(A, Q)` then updates with `(y, B, R)`; returns the log
    /// predictive density of `y`.
    pub fn advance(&mut self, y: &Vector, a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<f64> {
        let pred = kalman_predict(&self.belief, a, q)?;
        let log_pred = predictive_log_density(&pred, y, b, r)?;
        self.belief = kalman_update_gain(&pred, y, b, r)?;
        self.step += 1;
        Ok(log_pred)
    }
}

/// `log N(y; B μ_pred, B Σ_pred Bᵀ + R)`.
pub fn predictive_log_density(pred: &GaussianBelief, y: &Vector, b: &Matrix, r: &Matrix) -> Result<f64> {
    check_update_dims(pred, y, b, r)?;
    let s = symmetrize(&(b * &pred.cov * b.transpose() + r));
    let s_inv = spd_inverse(&s)?;
    let log_det = crate::linalg::spd_log_det(&s)?;
    Ok(crate::linalg::gaussian_log_density(y, &(b * &pred.mean), &s_inv, log_det))
}

/// Exact log marginal likelihood `log p(y_{1:n})` of a linear-Gaussian model.
pub fn kalman_log_evidence(
    prior: &GaussianBelief,
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    ys: &[Vector],
) -> Result<f64> {
    let mut state = KalmanState::new(prior.clone());
    ys.iter().try_fold(0.0, |acc, y| Ok(acc + state.advance(y, a, b, q, r)?))
}
