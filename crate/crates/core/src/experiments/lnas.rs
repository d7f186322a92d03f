//! Joint state and parameter estimation for the LNAS growth model.

use std::path::{Path, PathBuf};

use super::output::{float, write_table_csv, writer};
use super::{collect_results, run_methods, ExperimentConfig, Method, MethodResult, ReplicateData};
use crate::error::{Error, Result};
use crate::models::{simulate_observations, LnasConstants, LnasModel, LnasParams, LnasPrior, Weather};
use crate::smc::{BandwidthSchedule, ResamplingPolicy};

const PARAMS: [usize; 3] = [LnasModel::RUE, LnasModel::GAMMA, LnasModel::MU_A];

#[derive(Debug, Clone, PartialEq)]
pub struct LnasScenario {
    pub truth: LnasParams,
    pub prior: LnasPrior,
    pub constants: LnasConstants,
    pub r: f64,
    pub weather: Weather,
    /// Step of the summary table.
    pub table_step: usize,
}

impl LnasScenario {
    pub fn new(weather: Weather) -> Self {
        Self {
            truth: LnasParams { rue: 3.56, gamma: 0.625, mu_a: 550.0 },
            prior: LnasPrior::default(),
            constants: LnasConstants::default(),
            r: 0.1,
            weather,
            table_step: 100,
        }
    }

    pub fn model(&self) -> Result<LnasModel> {
        LnasModel::new(self.constants, self.prior, self.weather.clone(), self.r)
    }

    pub fn methods() -> Vec<Method> {
        vec![
            Method::new("rpf-ess", ResamplingPolicy::EssThreshold(0.5), BandwidthSchedule::RuleOfThumb),
            Method::new("rpf-harmonic", ResamplingPolicy::EssThreshold(0.5), BandwidthSchedule::Harmonic(None)),
            Method::new("sir-ess", ResamplingPolicy::EssThreshold(0.5), BandwidthSchedule::NoJitter),
            Method::new("sis", ResamplingPolicy::Never, BandwidthSchedule::NoJitter),
        ]
    }

    pub(crate) fn check_weather(&self, horizon: usize) -> Result<()> {
        if self.weather.len() < horizon {
            return Err(Error::Config(format!(
                "weather series has {} days but the horizon is {horizon}",
                self.weather.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn truth_row(&self) -> Vec<f64> {
        vec![self.truth.rue, self.truth.gamma, self.truth.mu_a]
    }

    /// `sqrt(tr Σ0)` over the three parameters.
    pub(crate) fn normalization(&self) -> f64 {
        (self.prior.rue.1.powi(2) + self.prior.gamma.1.powi(2) + self.prior.mu_a.1.powi(2)).sqrt()
    }
}

/// Replicate-averaged posterior mean and sd of each parameter, per step.
#[derive(Debug, Clone, PartialEq)]
pub struct LnasMethodResult {
    pub result: MethodResult,
    /// `[step][parameter] -> (mean of posterior means, mean of posterior sds)`.
    pub parameters: Vec<[(f64, f64); 3]>,
}

/// One row of the summary table: the across-replicate mean and std of a
/// posterior statistic (`mean` or `sd`) of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub parameter: String,
    pub statistic: String,
    pub value: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnasReport {
    pub methods: Vec<LnasMethodResult>,
    pub table_step: usize,
    pub table: Vec<TableRow>,
}

impl LnasReport {
    pub fn method(&self, label: &str) -> Option<&LnasMethodResult> {
        self.methods.iter().find(|m| m.result.method.label == label)
    }

    pub fn cell(&self, method: &str, parameter: &str, statistic: &str) -> Option<&TableRow> {
        self.table.iter().find(|r| r.method == method && r.parameter == parameter && r.statistic == statistic)
    }

    /// Method CSVs, `table.csv`, and `parameters.csv` (`method,step,parameter,mean,sd`).
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for m in &self.methods {
            written.extend(m.result.write_csv(dir)?);
        }
        std::fs::create_dir_all(dir)?;
        let path = dir.join("table.csv");
        write_table_csv(std::fs::File::create(&path)?, &self.table)?;
        written.push(path);

        let path = dir.join("parameters.csv");
        let mut out = writer(std::fs::File::create(&path)?);
        let err = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["method", "step", "parameter", "mean", "sd"]).map_err(err)?;
        for m in &self.methods {
            for (k, row) in m.parameters.iter().enumerate() {
                for (name, (mean, sd)) in LnasModel::PARAM_NAMES.iter().zip(row) {
                    out.write_record([
                        m.result.method.label.as_str(),
                        &(k + 1).to_string(),
                        name,
                        &float(*mean),
                        &float(*sd),
                    ])
                    .map_err(err)?;
                }
            }
        }
        out.flush()?;
        written.push(path);
        Ok(written)
    }
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    super::mean_std(&v)
}

/// Runs [`LnasScenario::methods`]; the policy and schedule of `config` are not used.
pub fn exp_lnas(config: &ExperimentConfig, scenario: &LnasScenario) -> Result<LnasReport> {
    scenario.check_weather(config.horizon)?;
    let model = scenario.model()?;
    let methods = LnasScenario::methods();
    let initial = model.initial_state(scenario.truth);
    let runs = run_methods(config, &methods, &PARAMS, scenario.normalization(), |key| {
        let sim = simulate_observations(&model, &initial, config.horizon, key, config.oracle)?;
        Ok(ReplicateData {
            model: model.clone(),
            observations: sim.observations,
            truth: vec![scenario.truth_row(); config.horizon],
        })
    })?;
    let results = collect_results(&methods, runs)?;

    let table_step = scenario.table_step.clamp(1, config.horizon);
    let mut table = Vec::new();
    let mut out = Vec::new();
    for result in results {
        let stat = |k: usize, p: usize| {
            result.runs.iter().map(move |r| {
                let e = &r.trace.steps[k].diagnostics.estimate;
                (e.mean[p], e.cov[(p, p)].max(0.0).sqrt())
            })
        };
        let parameters = (0..config.horizon)
            .map(|k| {
                let mut row = [(0.0, 0.0); 3];
                for (slot, &p) in row.iter_mut().zip(&PARAMS) {
                    *slot = (mean_std(stat(k, p).map(|s| s.0)).0, mean_std(stat(k, p).map(|s| s.1)).0);
                }
                row
            })
            .collect();
        for (name, &p) in LnasModel::PARAM_NAMES.iter().zip(&PARAMS) {
            for (statistic, pick) in [("mean", 0usize), ("sd", 1)] {
                let (value, std) = mean_std(stat(table_step - 1, p).map(|s| if pick == 0 { s.0 } else { s.1 }));
                table.push(TableRow {
                    method: result.method.label.clone(),
                    parameter: name.to_string(),
                    statistic: statistic.to_string(),
                    value,
                    std,
                });
            }
        }
        out.push(LnasMethodResult { result, parameters });
    }
    Ok(LnasReport { methods: out, table_step, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::synthetic_weather;

    fn config(horizon: usize) -> ExperimentConfig {
        ExperimentConfig {
            n_particles: 200,
            policy: ResamplingPolicy::Always,
            schedule: BandwidthSchedule::RuleOfThumb,
            horizon,
            replicates: 2,
            seed: 3,
            oracle: false,
        }
    }

    #[test]
    fn short_weather_is_a_config_error() {
        let s = LnasScenario::new(synthetic_weather(10, 1));
        assert!(matches!(exp_lnas(&config(20), &s), Err(Error::Config(_))));
    }

    #[test]
    fn table_has_every_cell() {
        let s = LnasScenario::new(synthetic_weather(40, 1));
        let rep = exp_lnas(&config(40), &s).unwrap();
        assert_eq!(rep.table_step, 40);
        assert_eq!(rep.table.len(), 4 * 3 * 2);
        for m in ["rpf-ess", "rpf-harmonic", "sir-ess", "sis"] {
            for p in LnasModel::PARAM_NAMES {
                let sd = rep.cell(m, p, "sd").unwrap();
                assert!(sd.value >= 0.0 && sd.std >= 0.0);
                assert!(rep.cell(m, p, "mean").unwrap().value.is_finite());
            }
        }
        assert_eq!(rep.method("sis").unwrap().parameters.len(), 40);
    }
}
