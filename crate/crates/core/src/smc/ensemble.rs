use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Matrix, Vector};
use crate::models::{GaussianBelief, HmmModel};
use crate::rng::{Purpose, StreamKey};

/// `N` weighted particles in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    states: Vec<f64>,
    log_weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// Builds an ensemble from row-major states and log-weights.
    pub fn new(dim: usize, states: Vec<f64>, log_weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("particle dimension must be at least 1".into()));
        }
        let n = log_weights.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 particles, got {n}")));
        }
        if states.len() != n * dim {
            return Err(Error::Dimension(format!(
                "{} state values for {n} particles of dimension {dim}",
                states.len()
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("particle states must be finite".into()));
        }
        Ok(Self { dim, states, log_weights })
    }

    /// Equally weighted ensemble from the same states.
    pub fn uniform(dim: usize, states: Vec<f64>) -> Result<Self> {
        let n = states.len().checked_div(dim).unwrap_or(0);
        Self::new(dim, states, vec![-(n as f64).ln(); n])
    }

    /// `n` equally weighted draws from the model prior; particle `i` uses its own stream.
    pub fn from_prior<M: HmmModel + ?Sized>(model: &M, n: usize, key: StreamKey) -> Result<Self> {
        let dim = model.state_dim();
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 particles, got {n}")));
        }
        let mut states = vec![0.0; n * dim];
        states.par_chunks_mut(dim).with_min_len(256).enumerate().for_each(|(i, x)| {
            model.prior_sample(&mut key.stream(Purpose::Prior, 0, i as u64), x);
        });
        Self::uniform(dim, states)
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [f64] {
        &mut self.states
    }

    /// States and log-weights, borrowed together.
    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.states, &mut self.log_weights)
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_weights_mut(&mut self) -> &mut [f64] {
        &mut self.log_weights
    }

    /// Linear-scale weights. Only meaningful after normalization.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    /// Replaces the states by the rows listed in `indices` and resets the weights to uniform.
    pub fn select(&mut self, indices: &[usize]) {
        let d = self.dim;
        let mut next = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            next.extend_from_slice(&self.states[i * d..(i + 1) * d]);
        }
        self.states = next;
        self.reset_weights();
    }

    pub fn reset_weights(&mut self) {
        let lw = -(self.len() as f64).ln();
        self.log_weights.iter_mut().for_each(|w| *w = lw);
    }
}

/// Normalizes log-weights in place and returns their log-sum-exp.
pub(crate) fn log_normalize(log_weights: &mut [f64]) -> Result<f64> {
    let max = log_weights.iter().filter(|w| !w.is_nan()).cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Degeneracy { step: 0 });
    }
    if max == f64::INFINITY {
        return Err(Error::InvalidInput("log-weight of +inf".into()));
    }
    let sum: f64 = log_weights.iter().map(|&w| if w.is_nan() { 0.0 } else { (w - max).exp() }).sum();
    let lse = max + sum.ln();
    for w in log_weights.iter_mut() {
        *w = if w.is_nan() { f64::NEG_INFINITY } else { *w - lse };
    }
    Ok(lse)
}

/// Normalizes the weights to sum to one and returns the log of the mean
/// unnormalized weight, `logsumexp(w) - ln N`.
///
/// NaN log-weights are treated as `-inf`.
pub fn normalize_weights(ensemble: &mut ParticleEnsemble) -> Result<f64> {
    let n = ensemble.len() as f64;
    Ok(log_normalize(&mut ensemble.log_weights)? - n.ln())
}

/// `1 / Σ wᵢ²` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().map(|w| w * w).sum();
    let n = weights.len() as f64;
    (1.0 / s).clamp(1.0, n)
}

/// Weighted mean and covariance of a normalized ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMoments {
    pub belief: GaussianBelief,
    /// Set when a single particle carries all the weight; the covariance is then zero.
    pub degenerate: bool,
}

/// `μ = Σ wᵢ xᵢ`, `Σ = N/(N-1) Σ wᵢ (xᵢ - μ)(xᵢ - μ)ᵀ`.
pub fn weighted_mean_cov(ensemble: &ParticleEnsemble) -> WeightedMoments {
    let d = ensemble.dim;
    let n = ensemble.len();
    let weights = ensemble.weights();
    let mut mean = Vector::zeros(d);
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            for (k, x) in ensemble.state(i).iter().enumerate() {
                mean[k] += w * x;
            }
        }
    }
    let degenerate = effective_sample_size(&weights) < 1.0 + 1e-9;
    let mut cov = Matrix::zeros(d, d);
    if !degenerate {
        let mut diff = vec![0.0; d];
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (k, x) in ensemble.state(i).iter().enumerate() {
                diff[k] = x - mean[k];
            }
            for a in 0..d {
                for b in 0..=a {
                    cov[(a, b)] += w * diff[a] * diff[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                cov[(b, a)] = cov[(a, b)];
            }
        }
        cov *= n as f64 / (n as f64 - 1.0);
        cov = symmetrize(&cov);
    }
    WeightedMoments { belief: GaussianBelief { mean, cov }, degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ens(states: Vec<f64>, lw: Vec<f64>) -> ParticleEnsemble {
        ParticleEnsemble::new(1, states, lw).unwrap()
    }

    #[test]
    fn equal_log_weights_give_increment_c() {
        let mut e = ens(vec![0.0, 1.0, 2.0, 3.0], vec![-1.7; 4]);
        let inc = normalize_weights(&mut e).unwrap();
        assert!((inc + 1.7).abs() < 1e-14);
        assert!(e.weights().iter().all(|w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_finite_weight_takes_all() {
        let mut e = ens(vec![0.0, 1.0, 2.0], vec![f64::NEG_INFINITY, -800.0, f64::NEG_INFINITY]);
        normalize_weights(&mut e).unwrap();
        assert_eq!(e.weights(), vec![0.0, 1.0, 0.0]);
        assert_eq!(effective_sample_size(&e.weights()), 1.0);
    }

    #[test]
    fn all_neg_inf_is_degeneracy() {
        let mut e = ens(vec![0.0, 1.0], vec![f64::NEG_INFINITY; 2]);
        assert!(matches!(normalize_weights(&mut e), Err(Error::Degeneracy { .. })));
    }

    #[test]
    fn ess_examples() {
        assert_eq!(effective_sample_size(&[0.25; 4]), 4.0);
        assert_eq!(effective_sample_size(&[1.0, 0.0, 0.0]), 1.0);
        assert_eq!(effective_sample_size(&[0.5, 0.5]), 2.0);
    }

    #[test]
    fn two_particles_at_plus_minus_one() {
        let e = ParticleEnsemble::uniform(1, vec![-1.0, 1.0]).unwrap();
        let m = weighted_mean_cov(&e);
        assert!(m.belief.mean[0].abs() < 1e-15);
        assert!((m.belief.cov[(0, 0)] - 2.0).abs() < 1e-14);
        assert!(!m.degenerate);
    }

    #[test]
    fn identical_particles_have_zero_covariance() {
        let e = ParticleEnsemble::uniform(2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        assert_eq!(weighted_mean_cov(&e).belief.cov, Matrix::zeros(2, 2));
    }

    #[test]
    fn degenerate_ensemble_is_flagged() {
        let mut e = ens(vec![0.0, 5.0], vec![0.0, f64::NEG_INFINITY]);
        normalize_weights(&mut e).unwrap();
        let m = weighted_mean_cov(&e);
        assert!(m.degenerate);
        assert_eq!(m.belief.cov[(0, 0)], 0.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn uniform_weights_match_sample_covariance() {
        use rand::Rng;
        let mut rng = StreamKey::new(4).stream(Purpose::Auxiliary, 0, 0);
        let n = 5000;
        let xs: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
        let e = ParticleEnsemble::uniform(2, xs.clone()).unwrap();
        let m = weighted_mean_cov(&e);
        // Textbook unbiased estimator.
        let mut mean = [0.0; 2];
        for i in 0..n {
            mean[0] += xs[2 * i] / n as f64;
            mean[1] += xs[2 * i + 1] / n as f64;
        }
        let mut c = [[0.0; 2]; 2];
        for i in 0..n {
            for a in 0..2 {
                for b in 0..2 {
                    c[a][b] += (xs[2 * i + a] - mean[a]) * (xs[2 * i + b] - mean[b]) / (n - 1) as f64;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                assert!((m.belief.cov[(a, b)] - c[a][b]).abs() < 1.0 / n as f64);
            }
        }
    }

    /// One-step identity: with `Z = mean(ℓ)` and weights `ℓ/Σℓ`, the
    /// empirical variance of `Z` is `Z²/ESS (1 - ESS/N)`.
    #[test]
    fn variance_ess_identity() {
        use rand::Rng;
        let mut rng = StreamKey::new(9).stream(Purpose::Auxiliary, 0, 0);
        for n in [2usize, 10, 1000] {
            let ell: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
            let z = ell.iter().sum::<f64>() / n as f64;
            let var = ell.iter().map(|l| (l - z).powi(2)).sum::<f64>() / n as f64;
            let mut e = ens(vec![0.0; n], ell.iter().map(|l| l.ln()).collect());
            let inc = normalize_weights(&mut e).unwrap();
            assert!((inc.exp() - z).abs() < 1e-12 * z);
            let ess = effective_sample_size(&e.weights());
            let predicted = z * z / ess * (1.0 - ess / n as f64);
            let var_z = var / n as f64;
            assert!((var_z - predicted).abs() < 1e-10 * z * z, "{var_z} vs {predicted}");
        }
    }

    proptest! {
        #[test]
        fn normalization_conserves_weight(lw in prop::collection::vec(-700.0f64..700.0, 2..200)) {
            let n = lw.len();
            let mut e = ens(vec![0.0; n], lw);
            normalize_weights(&mut e).unwrap();
            let sum: f64 = e.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let ess = effective_sample_size(&e.weights());
            prop_assert!((1.0..=n as f64).contains(&ess));
        }

        #[test]
        fn covariance_is_psd(xs in prop::collection::vec(-10.0f64..10.0, 6..60), lw in prop::collection::vec(-5.0f64..0.0, 3..30)) {
            let n = (xs.len() / 2).min(lw.len());
            let mut e = ParticleEnsemble::new(2, xs[..2 * n].to_vec(), lw[..n].to_vec()).unwrap();
            normalize_weights(&mut e).unwrap();
            prop_assert!(crate::linalg::is_psd(&weighted_mean_cov(&e).belief.cov));
        }
    }
}
