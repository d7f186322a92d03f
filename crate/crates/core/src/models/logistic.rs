use rand_distr::{Distribution, StandardNormal};

use super::{reflect_into, HmmModel, LogNormalNoise, StreamRng};
use crate::error::{Error, Result};

/// One step of the logistic map, `a * x * (1 - x)`.
pub fn logistic_step(a: f64, x: f64) -> Result<f64> {
    if !(0.0..=4.0).contains(&a) {
        return Err(Error::InvalidInput(format!("growth parameter {a} outside [0, 4]")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("population {x} outside [0, 1]")));
    }
    Ok(a * x * (1.0 - x))
}

/// Logistic map with unknown growth rate, state `(a, x)`.
///
/// `a` is constant along trajectories and estimated jointly with `x`; the
/// initial population is known. Observations are `x * eta` with lognormal `eta`.
#[derive(Debug, Clone)]
pub struct LogisticMapModel {
    prior_mean: f64,
    prior_sd: f64,
    x0: f64,
    noise: LogNormalNoise,
}

impl LogisticMapModel {
    pub const PARAM: usize = 0;
    pub const POPULATION: usize = 1;

    /// `a ~ N(prior_mean, prior_sd^2)` truncated to `[0, 4]`, fixed `x0`, noise level `r`.
    pub fn new(prior_mean: f64, prior_sd: f64, x0: f64, r: f64) -> Result<Self> {
        if !(prior_sd > 0.0) {
            return Err(Error::Config(format!("prior sd must be positive, got {prior_sd}")));
        }
        if !(0.0..=1.0).contains(&x0) {
            return Err(Error::Config(format!("initial population {x0} outside [0, 1]")));
        }
        if !(0.0..=4.0).contains(&prior_mean) {
            return Err(Error::Config(format!("prior mean {prior_mean} outside [0, 4]")));
        }
        Ok(Self { prior_mean, prior_sd, x0, noise: LogNormalNoise::new(r)? })
    }

    pub fn prior_sd(&self) -> f64 {
        self.prior_sd
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn noise(&self) -> &LogNormalNoise {
        &self.noise
    }

    /// Initial state for a known parameter value.
    pub fn initial_state(&self, a: f64) -> [f64; 2] {
        [a, self.x0]
    }
}

impl HmmModel for LogisticMapModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn prior_sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let a = loop {
            let z: f64 = StandardNormal.sample(rng);
            let a = self.prior_mean + self.prior_sd * z;
            if (0.0..=4.0).contains(&a) {
                break a;
            }
        };
        out[0] = a;
        out[1] = self.x0;
    }

    fn transition_sample(&self, state: &mut [f64], _step: usize, _rng: &mut StreamRng) {
        let a = state[0].clamp(0.0, 4.0);
        let x = state[1].clamp(0.0, 1.0);
        state[1] = a * x * (1.0 - x);
    }

    fn log_likelihood(&self, y: &[f64], x: &[f64], _step: usize) -> f64 {
        self.noise.log_density(y[0], x[1])
    }

    fn observe(&self, x: &[f64], _step: usize, rng: &mut StreamRng, noiseless: bool) -> Vec<f64> {
        if noiseless {
            vec![x[1]]
        } else {
            vec![self.noise.sample(x[1], rng)]
        }
    }

    fn project(&self, state: &mut [f64]) {
        state[0] = reflect_into(state[0], 0.0, 4.0);
        state[1] = reflect_into(state[1], 0.0, 1.0);
    }
}
