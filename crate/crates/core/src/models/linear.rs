use rand_distr::{Distribution, StandardNormal};

use super::{GaussianBelief, HmmModel, StreamRng};
use crate::error::{Error, Result};
use crate::linalg::{check_square, gaussian_log_density, psd_sqrt, spd_inverse, spd_log_det, Matrix, Vector};

/// Additive Gaussian noise with cached factorizations.
#[derive(Debug, Clone)]
struct GaussianNoise {
    cov: Matrix,
    inv: Matrix,
    log_det: f64,
    sqrt: Matrix,
}

impl GaussianNoise {
    fn new(cov: Matrix) -> Result<Self> {
        let inv = spd_inverse(&cov)
            .map_err(|_| Error::Config("observation noise covariance must be positive definite".into()))?;
        let log_det = spd_log_det(&cov)?;
        let sqrt = psd_sqrt(&cov);
        Ok(Self { cov, inv, log_det, sqrt })
    }

    fn log_density(&self, y: &[f64], signal: &Vector) -> f64 {
        let y = Vector::from_column_slice(y);
        gaussian_log_density(&y, signal, &self.inv, self.log_det)
    }

    fn sample(&self, signal: &Vector, rng: &mut StreamRng) -> Vec<f64> {
        let z = standard_normal_vector(signal.len(), rng);
        (signal + &self.sqrt * z).as_slice().to_vec()
    }
}

fn standard_normal_vector(d: usize, rng: &mut StreamRng) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)))
}

fn sample_belief(prior: &GaussianBelief, prior_sqrt: &Matrix, rng: &mut StreamRng, out: &mut [f64]) {
    let z = standard_normal_vector(prior.dim(), rng);
    let x = &prior.mean + prior_sqrt * z;
    out.copy_from_slice(x.as_slice());
}

/// Stationary state observed in additive Gaussian noise: `x_n = x_{n-1}`, `y_n = x_n + eta_n`.
///
/// The observation noise may be switched to a second covariance from a given
/// step onwards ("quench").
#[derive(Debug, Clone)]
pub struct StationaryLinearModel {
    prior: GaussianBelief,
    prior_sqrt: Matrix,
    noise: GaussianNoise,
    quench: Option<(usize, GaussianNoise)>,
}

impl StationaryLinearModel {
    pub fn new(prior: GaussianBelief, obs_noise: Matrix) -> Result<Self> {
        check_square("observation noise", &obs_noise, prior.dim())?;
        let prior_sqrt = psd_sqrt(&prior.cov);
        Ok(Self { prior, prior_sqrt, noise: GaussianNoise::new(obs_noise)?, quench: None })
    }

    /// One-dimensional model with prior `N(mu0, sigma0)` and noise variance `r`.
    pub fn scalar(mu0: f64, sigma0: f64, r: f64) -> Result<Self> {
        if !(sigma0 > 0.0) {
            return Err(Error::Config(format!("prior variance must be positive, got {sigma0}")));
        }
        Self::new(GaussianBelief::scalar(mu0, sigma0), Matrix::from_element(1, 1, r))
    }

    /// Uses `obs_noise` for every step `n >= from_step`.
    pub fn with_quench(mut self, from_step: usize, obs_noise: Matrix) -> Result<Self> {
        check_square("quench noise", &obs_noise, self.prior.dim())?;
        self.quench = Some((from_step, GaussianNoise::new(obs_noise)?));
        Ok(self)
    }

    pub fn prior(&self) -> &GaussianBelief {
        &self.prior
    }

    /// Observation noise covariance in force at `step`.
    pub fn obs_noise(&self, step: usize) -> &Matrix {
        &self.noise_at(step).cov
    }

    fn noise_at(&self, step: usize) -> &GaussianNoise {
        match &self.quench {
            Some((from, noise)) if step >= *from => noise,
            _ => &self.noise,
        }
    }
}

impl HmmModel for StationaryLinearModel {
    fn state_dim(&self) -> usize {
        self.prior.dim()
    }

    fn obs_dim(&self) -> usize {
        self.prior.dim()
    }

    fn prior_sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        sample_belief(&self.prior, &self.prior_sqrt, rng, out);
    }

    fn transition_sample(&self, _state: &mut [f64], _step: usize, _rng: &mut StreamRng) {}

    fn log_likelihood(&self, y: &[f64], x: &[f64], step: usize) -> f64 {
        let noise = self.noise_at(step);
        if x.len() == 1 {
            let d = y[0] - x[0];
            return -0.5 * ((2.0 * std::f64::consts::PI).ln() + noise.log_det + d * d * noise.inv[(0, 0)]);
        }
        noise.log_density(y, &Vector::from_column_slice(x))
    }

    fn observe(&self, x: &[f64], step: usize, rng: &mut StreamRng, noiseless: bool) -> Vec<f64> {
        if noiseless {
            return x.to_vec();
        }
        self.noise_at(step).sample(&Vector::from_column_slice(x), rng)
    }
}

/// Linear-Gaussian HMM: `x_n = A x_{n-1} + eps`, `y_n = B x_n + eta`.
#[derive(Debug, Clone)]
pub struct GeneralLinearModel {
    a: Matrix,
    b: Matrix,
    q: Matrix,
    q_sqrt: Matrix,
    noise: GaussianNoise,
    prior: GaussianBelief,
    prior_sqrt: Matrix,
}

impl GeneralLinearModel {
    pub fn new(a: Matrix, b: Matrix, q: Matrix, r: Matrix, prior: GaussianBelief) -> Result<Self> {
        let d = prior.dim();
        check_square("A", &a, d)?;
        check_square("Q", &q, d)?;
        if b.ncols() != d {
            return Err(Error::Dimension(format!("B must have {d} columns, got {}", b.ncols())));
        }
        check_square("R", &r, b.nrows())?;
        if !crate::linalg::is_psd(&q) {
            return Err(Error::Config("state noise covariance must be positive semi-definite".into()));
        }
        let q_sqrt = psd_sqrt(&q);
        let prior_sqrt = psd_sqrt(&prior.cov);
        Ok(Self { a, b, q, q_sqrt, noise: GaussianNoise::new(r)?, prior, prior_sqrt })
    }

    pub fn transition_matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn measurement_matrix(&self) -> &Matrix {
        &self.b
    }

    pub fn state_noise(&self) -> &Matrix {
        &self.q
    }

    pub fn obs_noise(&self) -> &Matrix {
        &self.noise.cov
    }

    pub fn prior(&self) -> &GaussianBelief {
        &self.prior
    }
}

impl HmmModel for GeneralLinearModel {
    fn state_dim(&self) -> usize {
        self.prior.dim()
    }

    fn obs_dim(&self) -> usize {
        self.b.nrows()
    }

    fn prior_sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        sample_belief(&self.prior, &self.prior_sqrt, rng, out);
    }

    fn transition_sample(&self, state: &mut [f64], _step: usize, rng: &mut StreamRng) {
        let x = Vector::from_column_slice(state);
        let z = standard_normal_vector(x.len(), rng);
        let next = &self.a * x + &self.q_sqrt * z;
        state.copy_from_slice(next.as_slice());
    }

    fn log_likelihood(&self, y: &[f64], x: &[f64], _step: usize) -> f64 {
        let signal = &self.b * Vector::from_column_slice(x);
        self.noise.log_density(y, &signal)
    }

    fn observe(&self, x: &[f64], _step: usize, rng: &mut StreamRng, noiseless: bool) -> Vec<f64> {
        let signal = &self.b * Vector::from_column_slice(x);
        if noiseless {
            return signal.as_slice().to_vec();
        }
        self.noise.sample(&signal, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamKey};

    #[test]
    fn scalar_likelihood_matches_general_path() {
        let m = StationaryLinearModel::scalar(0.0, 1.0, 0.25).unwrap();
        let direct = m.log_likelihood(&[0.3], &[-0.1], 1);
        let v = 0.25;
        let expected = -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + 0.16 / v);
        assert!((direct - expected).abs() < 1e-12);
    }

    #[test]
    fn quench_switches_noise() {
        let m = StationaryLinearModel::scalar(0.0, 1.0, 0.25)
            .unwrap()
            .with_quench(300, Matrix::from_element(1, 1, 1.0))
            .unwrap();
        assert_eq!(m.obs_noise(299)[(0, 0)], 0.25);
        assert_eq!(m.obs_noise(300)[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let prior = GaussianBelief::new(Vector::zeros(2), Matrix::identity(2, 2)).unwrap();
        assert!(matches!(
            GeneralLinearModel::new(
                Matrix::identity(2, 2),
                Matrix::identity(3, 3),
                Matrix::zeros(2, 2),
                Matrix::identity(3, 3),
                prior.clone()
            ),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(StationaryLinearModel::new(prior, Matrix::identity(3, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn transition_with_state_noise_has_right_spread() {
        let prior = GaussianBelief::scalar(0.0, 1.0);
        let m = GeneralLinearModel::new(
            Matrix::from_element(1, 1, 0.5),
            Matrix::identity(1, 1),
            Matrix::from_element(1, 1, 0.04),
            Matrix::identity(1, 1),
            prior,
        )
        .unwrap();
        let key = StreamKey::new(9);
        let n = 50_000;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = [2.0];
                m.transition_sample(&mut s, 1, &mut key.stream(Purpose::Transition, 1, i));
                s[0]
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005);
        assert!((var - 0.04).abs() < 0.002);
    }
}
