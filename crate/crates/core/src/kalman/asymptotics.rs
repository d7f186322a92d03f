//! Fixed points, convergence rates and ESS laws of the perturbed recursion.

use super::perturbed::{lemma_covariance_path, AlphaSequence};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Limit of the covariance under constant bandwidth `α_h`, and the residual
/// covariance of the posterior mean around the truth: `(α_h R, α_h/(2+α_h) R)`.
pub fn rpf_fixed_point(alpha_h: f64, r: &Matrix) -> Result<(Matrix, Matrix)> {
    if !(alpha_h >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha_h must be non-negative, got {alpha_h}")));
    }
    Ok((r * alpha_h, r * (alpha_h / (2.0 + alpha_h))))
}

/// `sqrt(tr(Σ∞ + residual))`: the RMSE floor under constant bandwidth.
pub fn asymptotic_rmse_bound(alpha_h: f64, r: &Matrix) -> Result<f64> {
    let (sigma, residual) = rpf_fixed_point(alpha_h, r)?;
    Ok((sigma + residual).trace().sqrt())
}

/// Limits along the residue class `q` when resampling every `p` steps:
/// `Σ∞(q) = α_h R / (p + α_h q)` and
/// `residual(q) = α_h/(2+α_h) · (p + α_h(2+α_h) q) / (p + α_h q)² · R`.
pub fn periodic_fixed_point(alpha_h: f64, p: usize, q: usize, r: &Matrix) -> Result<(Matrix, Matrix)> {
    if p == 0 || q >= p {
        return Err(Error::InvalidInput(format!("need p >= 1 and 0 <= q < p, got p={p}, q={q}")));
    }
    if !(alpha_h >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha_h must be non-negative, got {alpha_h}")));
    }
    let (pf, qf) = (p as f64, q as f64);
    let denom = pf + alpha_h * qf;
    let sigma = r * (alpha_h / denom);
    let residual = r * (alpha_h / (2.0 + alpha_h) * (pf + alpha_h * (2.0 + alpha_h) * qf) / (denom * denom));
    Ok((sigma, residual))
}

/// `(lower, upper)` scalar factors of the asymptotic band for period `p`:
/// `α_h/(p + (p−1)α_h)` and `α_h/p`.
pub fn periodic_band(alpha_h: f64, p: usize) -> (f64, f64) {
    let pf = p as f64;
    (alpha_h / (pf + (pf - 1.0) * alpha_h), alpha_h / pf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalRateReport {
    pub n_max: usize,
    /// `sup_n n Σ_n / R`.
    pub sup_scaled: f64,
    /// `n_max Σ_{n_max} / R`.
    pub final_scaled: f64,
    /// `(n, n Σ_n / R)` at powers of ten and at `n_max`.
    pub checkpoints: Vec<(usize, f64)>,
}

/// Evaluates `n Σ_n / R` along the closed form for a scalar stationary model.
///
/// Bounded values mean the covariance decays at the Fisher rate `R/n`.
pub fn optimal_rate_check(seq: &AlphaSequence, n_max: usize, sigma0: f64, r: f64) -> Result<OptimalRateReport> {
    if n_max < 100 {
        return Err(Error::InvalidInput(format!("n_max must be at least 100, got {n_max}")));
    }
    let path = lemma_covariance_path(n_max, sigma0, r, seq)?;
    let scaled: Vec<f64> = path.iter().enumerate().map(|(i, s)| (i + 1) as f64 * s / r).collect();
    let sup_scaled = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut checkpoints = Vec::new();
    let mut n = 1;
    while n < n_max {
        checkpoints.push((n, scaled[n - 1]));
        n *= 10;
    }
    checkpoints.push((n_max, scaled[n_max - 1]));
    Ok(OptimalRateReport { n_max, sup_scaled, final_scaled: scaled[n_max - 1], checkpoints })
}

/// Large-N limit of `ESS_n / N` for sequential importance sampling on the
/// scalar stationary model, with `γ = R / (n Σ0)`:
/// `sqrt(γ(2+γ))/(1+γ) · exp(−(μ0 − ȳ)² / (Σ0 (1+γ)(2+γ)))`.
pub fn ess_asymptotic(n: usize, mu0: f64, sigma0: f64, r: f64, y_bar: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(sigma0 > 0.0 && r > 0.0) {
        return Err(Error::InvalidInput("sigma0 and r must be positive".into()));
    }
    let g = r / (n as f64 * sigma0);
    let d = mu0 - y_bar;
    Ok((g * (2.0 + g)).sqrt() / (1.0 + g) * (-d * d / (sigma0 * (1.0 + g) * (2.0 + g))).exp())
}

/// Critical spacing ratio `β = sqrt(1−E²) / (1 − sqrt(1−E²))` for an ESS threshold `E ∈ (0, 1)`.
///
/// After a resampling at step `n`, the next one is due after about `β n` steps.
pub fn beta_crit(ess_crit: f64) -> Result<f64> {
    if !(ess_crit > 0.0 && ess_crit < 1.0) {
        return Err(Error::Config(format!(
            "ESS threshold must lie strictly inside (0, 1), got {ess_crit}; use the always/never policies for the endpoints"
        )));
    }
    let c = (1.0 - ess_crit * ess_crit).sqrt();
    Ok(c / (1.0 - c))
}

/// Predicted spacings `m_k = β (1+β)^{k−1} n0` for `k = 1..=count`.
pub fn predicted_spacings(beta: f64, n0: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| beta * (1.0 + beta).powi(k as i32 - 1) * n0).collect()
}
