//! Simplified LNAS sugar-beet growth model.
//!
//! Hidden state: leaf mass `l`, root mass `r`, thermal time `tau`. Unknown
//! parameters `(RUE, gamma, mu_a)` are appended to the state so the filter
//! estimates them jointly. Dynamics are deterministic and driven by daily
//! weather; both masses are observed every day through multiplicative
//! lognormal noise.

use rand_distr::{Distribution, StandardNormal};

use super::{reflect_into, HmmModel, LogNormalNoise, StreamRng, Weather};
use crate::error::{Error, Result};

/// Daily biomass production `RUE * phi * (1 - exp(-l / rho))`.
pub fn beer_lambert_production(l: f64, phi: f64, rue: f64, rho: f64) -> Result<f64> {
    if l < 0.0 || phi < 0.0 {
        return Err(Error::InvalidInput(format!("leaf mass {l} and radiation {phi} must be non-negative")));
    }
    if !(rue > 0.0 && rho > 0.0) {
        return Err(Error::InvalidInput(format!("RUE {rue} and rho {rho} must be positive")));
    }
    Ok(production(l, phi, rue, rho))
}

fn production(l: f64, phi: f64, rue: f64, rho: f64) -> f64 {
    // -expm1 keeps precision for l << rho
    rue * phi * (-(-l / rho).exp_m1())
}

/// Fraction of new biomass allocated to leaves at thermal time `tau`.
///
/// `(gamma / 2) * (1 - erf(ln(tau / mu_a) / (sqrt(2) sigma_a)))`, with the
/// `tau -> 0` limit `gamma`.
pub fn allocation_fraction(tau: f64, gamma: f64, mu_a: f64, sigma_a: f64) -> Result<f64> {
    if tau < 0.0 || !(mu_a > 0.0) || !(sigma_a > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need tau >= 0, mu_a > 0, sigma_a > 0 (got {tau}, {mu_a}, {sigma_a})"
        )));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("gamma {gamma} outside [0, 1]")));
    }
    Ok(allocation(tau, gamma, mu_a, sigma_a))
}

fn allocation(tau: f64, gamma: f64, mu_a: f64, sigma_a: f64) -> f64 {
    if tau <= 0.0 {
        return gamma;
    }
    let z = (tau / mu_a).ln() / (std::f64::consts::SQRT_2 * sigma_a);
    0.5 * gamma * (1.0 - libm::erf(z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnasState {
    pub leaf: f64,
    pub root: f64,
    pub thermal_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnasParams {
    pub rue: f64,
    pub gamma: f64,
    pub mu_a: f64,
}

/// Constants assumed known: leaf mass per unit area, allocation width and initial leaf mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnasConstants {
    pub rho: f64,
    pub sigma_a: f64,
    pub l0: f64,
}

impl Default for LnasConstants {
    fn default() -> Self {
        Self { rho: 100.0, sigma_a: 0.3, l0: 0.1 }
    }
}

/// Independent Gaussian priors, each `(mean, sd)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnasPrior {
    pub rue: (f64, f64),
    pub gamma: (f64, f64),
    pub mu_a: (f64, f64),
}

impl Default for LnasPrior {
    fn default() -> Self {
        Self { rue: (3.8, 0.3), gamma: (0.7, 0.05), mu_a: (500.0, 50.0) }
    }
}

/// One day of growth. Thermal time is advanced first and the allocation is
/// evaluated at the new thermal time.
pub fn lnas_step(
    state: LnasState,
    temp_c: f64,
    rad_mj: f64,
    params: LnasParams,
    constants: LnasConstants,
) -> Result<LnasState> {
    if state.leaf < 0.0 || state.root < 0.0 || state.thermal_time < 0.0 {
        return Err(Error::InvalidInput(format!("state {state:?} has negative components")));
    }
    let thermal_time = state.thermal_time + temp_c.max(0.0);
    let q = beer_lambert_production(state.leaf, rad_mj, params.rue, constants.rho)?;
    let a = allocation_fraction(thermal_time, params.gamma, params.mu_a, constants.sigma_a)?;
    Ok(LnasState { leaf: state.leaf + a * q, root: state.root + (1.0 - a) * q, thermal_time })
}

/// LNAS as a filtering model with state `[RUE, gamma, mu_a, l, r, tau]`.
#[derive(Debug, Clone)]
pub struct LnasModel {
    constants: LnasConstants,
    prior: LnasPrior,
    weather: Weather,
    noise: LogNormalNoise,
}

impl LnasModel {
    pub const RUE: usize = 0;
    pub const GAMMA: usize = 1;
    pub const MU_A: usize = 2;
    pub const LEAF: usize = 3;
    pub const ROOT: usize = 4;
    pub const THERMAL_TIME: usize = 5;
    pub const PARAM_NAMES: [&'static str; 3] = ["RUE", "gamma", "mu_a"];

    pub fn new(constants: LnasConstants, prior: LnasPrior, weather: Weather, r: f64) -> Result<Self> {
        if !(constants.rho > 0.0 && constants.sigma_a > 0.0 && constants.l0 > 0.0) {
            return Err(Error::Config(format!("LNAS constants must be positive: {constants:?}")));
        }
        for (name, (_, sd)) in [("RUE", prior.rue), ("gamma", prior.gamma), ("mu_a", prior.mu_a)] {
            if !(sd > 0.0) {
                return Err(Error::Config(format!("prior sd for {name} must be positive")));
            }
        }
        if weather.is_empty() {
            return Err(Error::Config("weather series is empty".into()));
        }
        Ok(Self { constants, prior, weather, noise: LogNormalNoise::new(r)? })
    }

    pub fn weather(&self) -> &Weather {
        &self.weather
    }

    pub fn constants(&self) -> LnasConstants {
        self.constants
    }

    /// Initial augmented state for known parameters.
    pub fn initial_state(&self, params: LnasParams) -> [f64; 6] {
        [params.rue, params.gamma, params.mu_a, self.constants.l0, 0.0, 0.0]
    }

    fn sanitize_params(state: &mut [f64]) {
        state[Self::RUE] = reflect_into(state[Self::RUE], 0.0, f64::INFINITY);
        state[Self::GAMMA] = reflect_into(state[Self::GAMMA], 0.0, 1.0);
        state[Self::MU_A] = reflect_into(state[Self::MU_A], 0.0, f64::INFINITY);
    }
}

impl HmmModel for LnasModel {
    fn state_dim(&self) -> usize {
        6
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn prior_sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let mut draw = |(mean, sd): (f64, f64)| {
            let z: f64 = StandardNormal.sample(rng);
            mean + sd * z
        };
        out[Self::RUE] = draw(self.prior.rue);
        out[Self::GAMMA] = draw(self.prior.gamma);
        out[Self::MU_A] = draw(self.prior.mu_a);
        out[Self::LEAF] = self.constants.l0;
        out[Self::ROOT] = 0.0;
        out[Self::THERMAL_TIME] = 0.0;
        Self::sanitize_params(out);
    }

    fn transition_sample(&self, state: &mut [f64], step: usize, _rng: &mut StreamRng) {
        let day = self.weather.day(step);
        let c = self.constants;
        let tau = state[Self::THERMAL_TIME].max(0.0) + day.temp_c.max(0.0);
        let leaf = state[Self::LEAF].max(0.0);
        let q = production(leaf, day.rad_mj, state[Self::RUE].max(0.0), c.rho);
        let a = allocation(tau, state[Self::GAMMA].clamp(0.0, 1.0), state[Self::MU_A].max(0.0), c.sigma_a);
        state[Self::THERMAL_TIME] = tau;
        state[Self::LEAF] = leaf + a * q;
        state[Self::ROOT] = state[Self::ROOT].max(0.0) + (1.0 - a) * q;
    }

    fn log_likelihood(&self, y: &[f64], x: &[f64], _step: usize) -> f64 {
        self.noise.log_density(y[0], x[Self::LEAF]) + self.noise.log_density(y[1], x[Self::ROOT])
    }

    fn observe(&self, x: &[f64], _step: usize, rng: &mut StreamRng, noiseless: bool) -> Vec<f64> {
        let (l, r) = (x[Self::LEAF], x[Self::ROOT]);
        if noiseless {
            vec![l, r]
        } else {
            vec![self.noise.sample(l, rng), self.noise.sample(r, rng)]
        }
    }

    fn project(&self, state: &mut [f64]) {
        Self::sanitize_params(state);
        for i in [Self::LEAF, Self::ROOT, Self::THERMAL_TIME] {
            state[i] = reflect_into(state[i], 0.0, f64::INFINITY);
        }
    }
}
