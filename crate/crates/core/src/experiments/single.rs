//! The configured filter on any of the experiment models.

use super::{collect_results, default_label, run_methods, ExperimentConfig, MethodResult, ReplicateData};
use super::{LnasScenario, LogisticScenario, StationaryScenario};
use crate::error::Result;
use crate::models::{simulate_observations, LnasModel, LogisticMapModel};

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Stationary(StationaryScenario),
    Logistic(LogisticScenario),
    Lnas(LnasScenario),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Stationary(_) => "stationary",
            Scenario::Logistic(_) => "logistic",
            Scenario::Lnas(_) => "lnas",
        }
    }
}

/// Runs the policy and schedule of `config` on `scenario`.
///
/// The RMSE covers the state for the stationary model and the static
/// parameters otherwise, normalized like the dedicated experiments.
pub fn exp_filter(config: &ExperimentConfig, scenario: &Scenario) -> Result<MethodResult> {
    let method = config.method(default_label(config.policy, config.schedule));
    let methods = std::slice::from_ref(&method);
    let horizon = config.horizon;
    let runs = match scenario {
        Scenario::Stationary(s) => {
            s.validate()?;
            run_methods(config, methods, &[0], s.sigma0.sqrt(), |key| s.data(horizon, config.oracle, key))?
        }
        Scenario::Logistic(s) => {
            let model = s.model()?;
            let initial = model.initial_state(s.a_true);
            run_methods(config, methods, &[LogisticMapModel::PARAM], s.prior_sd, |key| {
                let sim = simulate_observations(&model, &initial, horizon, key, config.oracle)?;
                Ok(ReplicateData {
                    model: model.clone(),
                    observations: sim.observations,
                    truth: vec![vec![s.a_true]; horizon],
                })
            })?
        }
        Scenario::Lnas(s) => {
            s.check_weather(horizon)?;
            let model = s.model()?;
            let initial = model.initial_state(s.truth);
            let components = [LnasModel::RUE, LnasModel::GAMMA, LnasModel::MU_A];
            run_methods(config, methods, &components, s.normalization(), |key| {
                let sim = simulate_observations(&model, &initial, horizon, key, config.oracle)?;
                Ok(ReplicateData {
                    model: model.clone(),
                    observations: sim.observations,
                    truth: vec![s.truth_row(); horizon],
                })
            })?
        }
    };
    Ok(collect_results(methods, runs)?.remove(0))
}
