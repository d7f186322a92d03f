//! Stationary model (`A = B = I`, `Q = 0`) with bandwidth-inflated covariance.

use crate::error::{Error, Result};
use crate::linalg::{check_square, spd_inverse, symmetrize, Matrix, Vector};
use crate::models::GaussianBelief;

/// Bandwidth factor `α_n` as a function of the step `n ≥ 1`; `α_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSequence {
    Zero,
    Constant(f64),
    /// `α_h` at multiples of `period`, zero elsewhere.
    Periodic {
        alpha: f64,
        period: usize,
    },
    /// `α_h / (1 + n α_h)`.
    Harmonic(f64),
    /// `α_h exp(-n α_h)`.
    ExponentialDecay(f64),
    /// `scale * n^(epsilon - 1)`.
    PowerLaw {
        scale: f64,
        epsilon: f64,
    },
    /// Explicit values for `n = 1, 2, ...`; zero past the end.
    Explicit(Vec<f64>),
}

impl AlphaSequence {
    pub fn alpha(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let nf = n as f64;
        match self {
            AlphaSequence::Zero => 0.0,
            AlphaSequence::Constant(a) => *a,
            AlphaSequence::Periodic { alpha, period } => {
                if *period > 0 && n.is_multiple_of(*period) {
                    *alpha
                } else {
                    0.0
                }
            }
            AlphaSequence::Harmonic(a) => a / (1.0 + nf * a),
            AlphaSequence::ExponentialDecay(a) => a * (-nf * a).exp(),
            AlphaSequence::PowerLaw { scale, epsilon } => scale * nf.powf(epsilon - 1.0),
            AlphaSequence::Explicit(v) => v.get(n - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = match self {
            AlphaSequence::Zero => false,
            AlphaSequence::Constant(a) | AlphaSequence::Harmonic(a) | AlphaSequence::ExponentialDecay(a) => {
                !(*a >= 0.0)
            }
            AlphaSequence::Periodic { alpha, period } => !(*alpha >= 0.0) || *period == 0,
            AlphaSequence::PowerLaw { scale, .. } => !(*scale >= 0.0),
            AlphaSequence::Explicit(v) => v.iter().any(|a| !(*a >= 0.0)),
        };
        if bad {
            return Err(Error::Config(format!("invalid alpha sequence {self:?}")));
        }
        Ok(())
    }
}

/// Exact stationary-model posterior after `n` observations with running mean `y_bar`:
/// `Σ_n = R (R + n Σ0)⁻¹ Σ0`, `μ_n = Σ_n Σ0⁻¹ μ0 + (I − Σ_n Σ0⁻¹) ȳ_n`.
pub fn stationary_closed_form(n: usize, prior: &GaussianBelief, r: &Matrix, y_bar: &Vector) -> Result<GaussianBelief> {
    let d = prior.dim();
    check_square("R", r, d)?;
    if y_bar.len() != d {
        return Err(Error::Dimension(format!("y_bar has length {}, state has {d}", y_bar.len())));
    }
    if n == 0 {
        return Ok(prior.clone());
    }
    let s0 = &prior.cov;
    let cov = symmetrize(&(r * spd_inverse(&(r + s0 * n as f64))? * s0));
    let shrink = &cov * spd_inverse(s0)?;
    let mean = &shrink * &prior.mean + (Matrix::identity(d, d) - &shrink) * y_bar;
    Ok(GaussianBelief { mean, cov })
}

/// One step of the bandwidth-perturbed recursion:
/// `(Σ⁻¹ + R⁻¹) μ' = Σ⁻¹ μ + R⁻¹ y`, `Σ' = (1 + α) (Σ⁻¹ + R⁻¹)⁻¹`.
///
/// With `α = 0` this is the Kalman update for `B = I`.
pub fn perturbed_recursion_step(belief: &GaussianBelief, y: &Vector, r: &Matrix, alpha: f64) -> Result<GaussianBelief> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be non-negative, got {alpha}")));
    }
    let d = belief.dim();
    let post = super::kalman_update(belief, y, &Matrix::identity(d, d), r)?;
    Ok(GaussianBelief { mean: post.mean, cov: post.cov * (1.0 + alpha) })
}

/// Scalar accumulators for the closed form, kept as ratios so they neither
/// overflow nor lose precision:
/// `inv_p = 1/P_n`, `s_over_p = S_n/P_n`, `weighted_y = Σ P_{j-1} y_j / S_n`
/// with `P_n = Π_{j≤n}(1+α_j)` and `S_n = Σ_{j≤n} P_{j-1}`.
struct LemmaAccumulator {
    n: usize,
    inv_p: f64,
    s_over_p: f64,
}

impl LemmaAccumulator {
    fn new() -> Self {
        Self { n: 0, inv_p: 1.0, s_over_p: 0.0 }
    }

    /// Advances to `n + 1`; returns the weight `P_n / S_{n+1}` of the new observation.
    fn advance(&mut self, seq: &AlphaSequence) -> f64 {
        self.n += 1;
        let growth = 1.0 + seq.alpha(self.n);
        self.s_over_p = (self.s_over_p + 1.0) / growth;
        self.inv_p /= growth;
        1.0 / (growth * self.s_over_p)
    }

    /// `Σ_n = R (R / P_n + (S_n / P_n) Σ0)⁻¹ Σ0`.
    fn covariance(&self, sigma0: &Matrix, r: &Matrix) -> Result<Matrix> {
        let inner = r * self.inv_p + sigma0 * self.s_over_p;
        Ok(symmetrize(&(r * spd_inverse(&inner)? * sigma0)))
    }
}

/// Closed-form solution of the perturbed recursion after `ys.len()` observations.
pub fn lemma_closed_form(
    prior: &GaussianBelief,
    r: &Matrix,
    ys: &[Vector],
    seq: &AlphaSequence,
) -> Result<GaussianBelief> {
    seq.validate()?;
    let d = prior.dim();
    check_square("R", r, d)?;
    if ys.is_empty() {
        return Ok(prior.clone());
    }
    let mut acc = LemmaAccumulator::new();
    let mut weighted_y = Vector::zeros(d);
    for y in ys {
        if y.len() != d {
            return Err(Error::Dimension(format!("observation has length {}, state has {d}", y.len())));
        }
        let w = acc.advance(seq);
        weighted_y += (y - &weighted_y) * w;
    }
    let cov = acc.covariance(&prior.cov, r)?;
    let shrink = &cov * spd_inverse(&prior.cov)? * acc.inv_p;
    let mean = &shrink * &prior.mean + (Matrix::identity(d, d) - &shrink) * weighted_y;
    Ok(GaussianBelief { mean, cov })
}

/// Closed-form `Σ_n` for `n = 1..=n_max` in the scalar case.
pub fn lemma_covariance_path(n_max: usize, sigma0: f64, r: f64, seq: &AlphaSequence) -> Result<Vec<f64>> {
    seq.validate()?;
    if !(sigma0 > 0.0 && r > 0.0) {
        return Err(Error::Config("sigma0 and r must be positive".into()));
    }
    let mut acc = LemmaAccumulator::new();
    Ok((0..n_max)
        .map(|_| {
            acc.advance(seq);
            r * sigma0 / (r * acc.inv_p + sigma0 * acc.s_over_p)
        })
        .collect())
}
