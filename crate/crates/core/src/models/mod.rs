//! Hidden Markov models: the filtering contract and the concrete model families.
//!
//! States and observations are passed as `f64` slices so that particle
//! ensembles can be stored as one flat buffer.

mod linear;
mod lnas;
mod logistic;
mod lognormal;
mod simulate;
pub mod weather;

pub use linear::{GeneralLinearModel, StationaryLinearModel};
pub use lnas::{
    allocation_fraction, beer_lambert_production, lnas_step, LnasConstants, LnasModel, LnasParams, LnasPrior, LnasState,
};
pub use logistic::{logistic_step, LogisticMapModel};
pub use lognormal::{lognormal_log_likelihood, LogNormalNoise};
pub use simulate::{simulate_observations, Simulation};
pub use weather::{synthetic_weather, Weather, WeatherDay};

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{is_psd, Matrix, Vector};

/// Random stream handed to model callbacks.
pub type StreamRng = ChaCha8Rng;

/// A Gaussian distribution `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Matrix,
}

impl GaussianBelief {
    /// Builds a belief, checking dimensions, symmetry and positive semi-definiteness.
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mean has non-finite entries".into()));
        }
        if !is_psd(&cov) {
            return Err(Error::InvalidInput("covariance must be symmetric positive semi-definite".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn scalar(mean: f64, var: f64) -> Self {
        Self { mean: Vector::from_element(1, mean), cov: Matrix::from_element(1, 1, var) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// The filtering contract: prior `π0`, transition kernel `f_n` and
/// measurement density `g_n`.
///
/// Implementations must be pure given the random stream they are handed:
/// the filter evaluates particles in parallel and relies on it.
pub trait HmmModel: Sync {
    fn state_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    /// Draws an initial state into `out` (length `state_dim`).
    fn prior_sample(&self, rng: &mut StreamRng, out: &mut [f64]);

    /// Advances `state` in place from step `step - 1` to `step`.
    fn transition_sample(&self, state: &mut [f64], step: usize, rng: &mut StreamRng);

    /// `log g_step(y | x)`; may be `-inf`.
    fn log_likelihood(&self, y: &[f64], x: &[f64], step: usize) -> f64;

    /// Draws `y ~ g_step(. | x)`, or returns the noiseless signal when `noiseless` is set.
    fn observe(&self, x: &[f64], step: usize, rng: &mut StreamRng, noiseless: bool) -> Vec<f64>;

    /// Maps a jittered state back into the model's support.
    fn project(&self, _state: &mut [f64]) {}
}

/// Reflects `v` at `lo` (and `hi` if finite), then clamps.
pub(crate) fn reflect_into(v: f64, lo: f64, hi: f64) -> f64 {
    let mut v = v;
    if v < lo {
        v = 2.0 * lo - v;
    }
    if v > hi {
        v = 2.0 * hi - v;
    }
    v.clamp(lo, hi)
}
