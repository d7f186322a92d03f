//! Multiplicative lognormal observation noise, `y = x * eta`.
//!
//! `log(eta) ~ N(0, s2)` with `s2 = ln(1 + r)`: the multiplier has median 1,
//! so the noiseless signal `y = x` is the centre of the likelihood in log
//! space, and `Var[log(eta)] ~ r` for small `r`.

use rand_distr::{Distribution, StandardNormal};

use super::StreamRng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalNoise {
    r: f64,
    s2: f64,
    m: f64,
}

impl LogNormalNoise {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("lognormal noise level must be positive, got {r}")));
        }
        let s2 = r.ln_1p();
        Ok(Self { r, s2, m: 0.0 })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Variance of `log(eta)`.
    pub fn log_variance(&self) -> f64 {
        self.s2
    }

    /// Mean of `log(eta)`.
    pub fn log_location(&self) -> f64 {
        self.m
    }

    /// Density of `y` given signal `x`, in log space.
    pub fn log_density(&self, y: f64, x: f64) -> f64 {
        if y <= 0.0 || x <= 0.0 || !y.is_finite() || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let z = y.ln() - x.ln() - self.m;
        -0.5 * (2.0 * std::f64::consts::PI * self.s2).ln() - y.ln() - z * z / (2.0 * self.s2)
    }

    pub fn sample(&self, x: f64, rng: &mut StreamRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        x * (self.m + self.s2.sqrt() * z).exp()
    }
}

/// `log p(y | x)` for `y = x * eta`, `eta` lognormal with unit median and noise level `r`.
///
/// Returns `-inf` when `x = 0` and `y > 0`.
pub fn lognormal_log_likelihood(y: f64, x: f64, r: f64) -> Result<f64> {
    if y <= 0.0 {
        return Err(Error::InvalidInput(format!("observation must be positive, got {y}")));
    }
    if x < 0.0 {
        return Err(Error::InvalidInput(format!("signal must be non-negative, got {x}")));
    }
    Ok(LogNormalNoise::new(r)?.log_density(y, x))
}
