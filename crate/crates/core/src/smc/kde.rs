//! MISE-optimal kernel bandwidths and a numerical MISE estimator.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

/// `h⁵ = ‖K‖² / (N ‖p''‖² (∫z²K)²)`.
pub fn mise_optimal_bandwidth(
    kernel_l2_sq: f64,
    curvature_l2_sq: f64,
    kernel_second_moment: f64,
    n: usize,
) -> Result<f64> {
    if !(kernel_l2_sq > 0.0 && curvature_l2_sq > 0.0 && kernel_second_moment > 0.0 && n > 0) {
        return Err(Error::InvalidInput("bandwidth inputs must be positive".into()));
    }
    let h5 = kernel_l2_sq / (n as f64 * curvature_l2_sq * kernel_second_moment * kernel_second_moment);
    Ok(h5.powf(0.2))
}

/// Gaussian kernel on a Gaussian target of variance `sigma2`: `h⁵ = 4 σ⁵ / (3N)`.
pub fn gaussian_mise_bandwidth(sigma2: f64, n: usize) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!("variance must be positive, got {sigma2}")));
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let kernel_l2 = 1.0 / (2.0 * sqrt_pi);
    let curvature_l2 = 3.0 / (8.0 * sqrt_pi * sigma2.powf(2.5));
    mise_optimal_bandwidth(kernel_l2, curvature_l2, 1.0, n)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Integrated squared error of a Gaussian KDE with bandwidth `h` built from
/// `samples`, against the standard normal density, on a grid over [-8, 8].
pub fn integrated_squared_error(samples: &[f64], h: f64) -> f64 {
    const LO: f64 = -8.0;
    const POINTS: usize = 1601;
    let dx = -2.0 * LO / (POINTS - 1) as f64;
    let n = samples.len() as f64;
    let sq: Vec<f64> = (0..POINTS)
        .into_par_iter()
        .map(|k| {
            let x = LO + k as f64 * dx;
            let est = samples.iter().map(|s| std_normal_pdf((x - s) / h)).sum::<f64>() / (n * h);
            (est - std_normal_pdf(x)).powi(2)
        })
        .collect();
    // Trapezoid rule; the integrand is negligible at the ends.
    dx * (sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[POINTS - 1]))
}

/// Monte Carlo MISE of the Gaussian KDE on `n` standard normal samples.
pub fn numerical_mise(n: usize, h: f64, replicates: usize, key: StreamKey) -> f64 {
    let total: f64 = (0..replicates)
        .map(|r| {
            let mut rng = key.stream(Purpose::Auxiliary, n as u64, r as u64);
            let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            integrated_squared_error(&xs, h)
        })
        .sum();
    total / replicates as f64
}
