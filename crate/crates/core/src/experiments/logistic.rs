//! Estimating the growth rate `a` of a logistic map from noisy populations.

use std::path::{Path, PathBuf};

use super::{collect_results, run_methods, ExperimentConfig, Method, MethodResult, ReplicateData};
use crate::error::{Error, Result};
use crate::models::{simulate_observations, LogisticMapModel};
use crate::smc::{BandwidthSchedule, ResamplingPolicy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticScenario {
    pub a_true: f64,
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub x0: f64,
    pub r: f64,
}

impl Default for LogisticScenario {
    fn default() -> Self {
        Self { a_true: 3.33, prior_mean: 3.0, prior_sd: 0.3, x0: 0.5, r: 0.1 }
    }
}

impl LogisticScenario {
    pub fn model(&self) -> Result<LogisticMapModel> {
        if !(0.0..=4.0).contains(&self.a_true) {
            return Err(Error::Config(format!("true growth rate {} outside [0, 4]", self.a_true)));
        }
        LogisticMapModel::new(self.prior_mean, self.prior_sd, self.x0, self.r)
    }

    /// The compared filters: constant bandwidth with resampling at every
    /// step, the same with an ESS trigger, and harmonic bandwidth decay.
    pub fn methods() -> Vec<Method> {
        vec![
            Method::new("rpf-always", ResamplingPolicy::Always, BandwidthSchedule::RuleOfThumb),
            Method::new("rpf-ess", ResamplingPolicy::EssThreshold(0.5), BandwidthSchedule::RuleOfThumb),
            Method::new("rpf-harmonic", ResamplingPolicy::Always, BandwidthSchedule::Harmonic(None)),
        ]
    }
}

/// RMSE of `a` (in prior sds) for noisy and noiseless observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticReport {
    pub noisy: Vec<MethodResult>,
    pub oracle: Vec<MethodResult>,
}

impl LogisticReport {
    /// Writes `noisy/<method>/...` and `oracle/<method>/...`.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (sub, results) in [("noisy", &self.noisy), ("oracle", &self.oracle)] {
            for r in results {
                written.extend(r.write_csv(&dir.join(sub))?);
            }
        }
        Ok(written)
    }

    pub fn noisy(&self, label: &str) -> Option<&MethodResult> {
        self.noisy.iter().find(|m| m.method.label == label)
    }

    pub fn oracle(&self, label: &str) -> Option<&MethodResult> {
        self.oracle.iter().find(|m| m.method.label == label)
    }
}

/// Runs [`LogisticScenario::methods`] on noisy observations and in the
/// oracle limit. The policy and schedule of `config` are not used.
pub fn exp_logistic(config: &ExperimentConfig, scenario: &LogisticScenario) -> Result<LogisticReport> {
    let model = scenario.model()?;
    let methods = LogisticScenario::methods();
    let initial = model.initial_state(scenario.a_true);
    let run = |oracle: bool| -> Result<Vec<MethodResult>> {
        let runs = run_methods(config, &methods, &[LogisticMapModel::PARAM], scenario.prior_sd, |key| {
            let sim = simulate_observations(&model, &initial, config.horizon, key, oracle)?;
            Ok(ReplicateData {
                model: model.clone(),
                observations: sim.observations,
                truth: vec![vec![scenario.a_true]; config.horizon],
            })
        })?;
        collect_results(&methods, runs)
    };
    Ok(LogisticReport { noisy: run(false)?, oracle: run(true)? })
}
