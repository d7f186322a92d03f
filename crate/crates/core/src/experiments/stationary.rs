//! Experiments on the one-dimensional stationary model `x_n = x_0`, `y_n = x_0 + η_n`.

use std::path::{Path, PathBuf};

use super::output::write_rows;
use super::{collect_results, default_label, run_methods, ExperimentConfig, Method, MethodResult, ReplicateData};
use crate::error::{Error, Result};
use crate::kalman::{asymptotic_rmse_bound, beta_crit, kalman_update, periodic_fixed_point};
use crate::linalg::{Matrix, Vector};
use crate::models::{simulate_observations, GaussianBelief, StationaryLinearModel};
use crate::rng::StreamKey;
use crate::smc::{compute_alpha, BandwidthSchedule, ResamplingPolicy};

/// Observation noise switches to `ratio * Σ0` from `step` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quench {
    pub step: usize,
    pub ratio: f64,
}

/// Prior `N(x0 + shift sqrt(Σ0), Σ0)`, truth `x0`, noise variance `ratio * Σ0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryScenario {
    pub sigma0: f64,
    pub ratio: f64,
    pub x0: f64,
    /// Prior mean offset in prior standard deviations.
    pub shift: f64,
    pub quench: Option<Quench>,
}

impl Default for StationaryScenario {
    fn default() -> Self {
        Self { sigma0: 1.0, ratio: 0.25, x0: 0.0, shift: 1.0, quench: None }
    }
}

impl StationaryScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.ratio > 0.0) {
            return Err(Error::Config("prior variance and noise ratio must be positive".into()));
        }
        if let Some(q) = self.quench {
            if !(q.ratio > 0.0) || q.step == 0 {
                return Err(Error::Config("quench needs a step >= 1 and a positive ratio".into()));
            }
        }
        Ok(())
    }

    pub fn prior_mean(&self) -> f64 {
        self.x0 + self.shift * self.sigma0.sqrt()
    }

    /// Observation noise variance at `step`.
    pub fn noise(&self, step: usize) -> f64 {
        match self.quench {
            Some(q) if step >= q.step => q.ratio * self.sigma0,
            _ => self.ratio * self.sigma0,
        }
    }

    pub fn model(&self) -> Result<StationaryLinearModel> {
        self.validate()?;
        let m = StationaryLinearModel::scalar(self.prior_mean(), self.sigma0, self.noise(1))?;
        match self.quench {
            Some(q) => m.with_quench(q.step, Matrix::from_element(1, 1, self.noise(q.step))),
            None => Ok(m),
        }
    }

    /// Exact posterior after each observation.
    pub fn kalman_path(&self, observations: &[Vec<f64>]) -> Result<Vec<GaussianBelief>> {
        let id = Matrix::identity(1, 1);
        let mut belief = GaussianBelief::scalar(self.prior_mean(), self.sigma0);
        observations
            .iter()
            .enumerate()
            .map(|(k, y)| {
                let r = Matrix::from_element(1, 1, self.noise(k + 1));
                belief = kalman_update(&belief, &Vector::from_vec(y.clone()), &id, &r)?;
                Ok(belief.clone())
            })
            .collect()
    }

    /// Expected normalized Kalman RMSE over observation noise:
    /// `sqrt(E(μ_n - x0)² + Σ_n) / sqrt(Σ0)` with
    /// `E(μ_n - x0)² = Σ_n² (shift²/Σ0 + Σ_j 1/R_j)` (no noise term in the oracle limit).
    pub fn kalman_expected_rmse(&self, horizon: usize, oracle: bool) -> Vec<f64> {
        let mut info = 1.0 / self.sigma0;
        let mut noise_info = 0.0;
        (1..=horizon)
            .map(|n| {
                let inv_r = 1.0 / self.noise(n);
                info += inv_r;
                if !oracle {
                    noise_info += inv_r;
                }
                let s = 1.0 / info;
                let bias2 = s * s * (self.shift * self.shift / self.sigma0 + noise_info);
                ((bias2 + s) / self.sigma0).sqrt()
            })
            .collect()
    }

    /// Asymptotic normalized RMSE of the regularized filter at `step`, when
    /// it is known in closed form (constant bandwidth with `Always` or
    /// `Periodic` resampling); `NaN` otherwise.
    pub fn fixed_point_bound(&self, config: &ExperimentConfig, step: usize) -> f64 {
        let alpha = match config.schedule {
            BandwidthSchedule::RuleOfThumb | BandwidthSchedule::Silverman1d => {
                compute_alpha(config.schedule, step, config.n_particles, 1).alpha
            }
            _ => return f64::NAN,
        };
        let r = Matrix::from_element(1, 1, self.noise(step));
        let bound = match config.policy {
            ResamplingPolicy::Always => asymptotic_rmse_bound(alpha, &r),
            ResamplingPolicy::Periodic(p) => {
                periodic_fixed_point(alpha, p, step % p, &r).map(|(s, res)| (s[(0, 0)] + res[(0, 0)]).sqrt())
            }
            _ => return f64::NAN,
        };
        bound.map_or(f64::NAN, |b| b / self.sigma0.sqrt())
    }

    pub(crate) fn data(
        &self,
        horizon: usize,
        oracle: bool,
        key: StreamKey,
    ) -> Result<ReplicateData<StationaryLinearModel>> {
        let model = self.model()?;
        let sim = simulate_observations(&model, &[self.x0], horizon, key, oracle)?;
        Ok(ReplicateData { model, observations: sim.observations, truth: vec![vec![self.x0]; horizon] })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayRow {
    pub step: usize,
    /// Kalman RMSE on the replicates' own observations, averaged.
    pub kalman_rmse: f64,
    /// Expected Kalman RMSE over the observation noise.
    pub kalman_expected: f64,
    pub fixed_point_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    pub result: MethodResult,
    pub overlay: Vec<OverlayRow>,
}

impl StationaryReport {
    /// Method CSVs plus `overlay.csv` (`step,kalman_rmse,kalman_expected,fixed_point_bound`).
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = self.result.write_csv(dir)?;
        let path = dir.join("overlay.csv");
        write_rows(
            std::fs::File::create(&path)?,
            &["step", "kalman_rmse", "kalman_expected", "fixed_point_bound"],
            self.overlay.iter().map(|o| (o.step, vec![o.kalman_rmse, o.kalman_expected, o.fixed_point_bound])),
        )?;
        written.push(path);
        Ok(written)
    }
}

fn replicate_keys(config: &ExperimentConfig) -> impl Iterator<Item = StreamKey> + '_ {
    (0..config.replicates).map(|r| StreamKey::new(config.replicate_seed(r)).derive(super::TRUTH_TAG))
}

/// RMSE curves of the configured filter, with Kalman and fixed-point overlays.
pub fn exp_stationary(config: &ExperimentConfig, scenario: &StationaryScenario) -> Result<StationaryReport> {
    scenario.validate()?;
    let method = config.method(default_label(config.policy, config.schedule));
    let norm = scenario.sigma0.sqrt();
    let runs = run_methods(config, std::slice::from_ref(&method), &[0], norm, |key| {
        scenario.data(config.horizon, config.oracle, key)
    })?;
    let result = collect_results(&[method], runs)?.remove(0);

    let mut kalman_sum = vec![0.0; config.horizon];
    for key in replicate_keys(config) {
        let data = scenario.data(config.horizon, config.oracle, key)?;
        for (k, b) in scenario.kalman_path(&data.observations)?.iter().enumerate() {
            kalman_sum[k] += ((b.mean[0] - scenario.x0).powi(2) + b.cov[(0, 0)]).sqrt() / norm;
        }
    }
    let expected = scenario.kalman_expected_rmse(config.horizon, config.oracle);
    let overlay = (0..config.horizon)
        .map(|k| OverlayRow {
            step: k + 1,
            kalman_rmse: kalman_sum[k] / config.replicates as f64,
            kalman_expected: expected[k],
            fixed_point_bound: scenario.fixed_point_bound(config, k + 1),
        })
        .collect();
    Ok(StationaryReport { result, overlay })
}

/// Regularized filter against the bootstrap filter under a badly shifted prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedPriorReport {
    pub rpf: MethodResult,
    pub sir: MethodResult,
    /// Exact posterior sd at the final step.
    pub kalman_sd: f64,
    /// Final posterior sd over the Kalman sd, per replicate.
    pub rpf_sd_ratio: Vec<f64>,
    pub sir_sd_ratio: Vec<f64>,
    /// Final posterior sd below `1e-3 sqrt(Σ0)`, per replicate.
    pub rpf_collapsed: Vec<bool>,
    pub sir_collapsed: Vec<bool>,
}

impl ShiftedPriorReport {
    /// Method CSVs plus `collapse.csv` (`replicate,method,sd_ratio,collapsed`).
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = self.rpf.write_csv(dir)?;
        written.extend(self.sir.write_csv(dir)?);
        let path = dir.join("collapse.csv");
        let mut out = super::output::writer(std::fs::File::create(&path)?);
        let err = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["replicate", "method", "sd_ratio", "collapsed"]).map_err(err)?;
        for (label, ratios, collapsed) in [
            (&self.rpf.method.label, &self.rpf_sd_ratio, &self.rpf_collapsed),
            (&self.sir.method.label, &self.sir_sd_ratio, &self.sir_collapsed),
        ] {
            for (r, (ratio, c)) in ratios.iter().zip(collapsed).enumerate() {
                out.write_record([
                    r.to_string(),
                    label.clone(),
                    super::output::float(*ratio),
                    u8::from(*c).to_string(),
                ])
                .map_err(err)?;
            }
        }
        out.flush()?;
        written.push(path);
        Ok(written)
    }
}

/// Runs the configured policy with the configured bandwidth (`rpf`) and
/// without jitter (`sir`) on the same observations.
pub fn exp_shifted_prior(config: &ExperimentConfig, scenario: &StationaryScenario) -> Result<ShiftedPriorReport> {
    scenario.validate()?;
    let rpf_schedule = match config.schedule {
        BandwidthSchedule::NoJitter => BandwidthSchedule::RuleOfThumb,
        s => s,
    };
    let methods = [
        Method::new("rpf", config.policy, rpf_schedule),
        Method::new("sir", config.policy, BandwidthSchedule::NoJitter),
    ];
    let runs = run_methods(config, &methods, &[0], scenario.sigma0.sqrt(), |key| {
        scenario.data(config.horizon, config.oracle, key)
    })?;
    let mut results = collect_results(&methods, runs)?;
    let sir = results.pop().expect("two methods");
    let rpf = results.pop().expect("two methods");

    let mut info = 1.0 / scenario.sigma0;
    for n in 1..=config.horizon {
        info += 1.0 / scenario.noise(n);
    }
    let kalman_sd = info.recip().sqrt();
    let final_sd = |m: &MethodResult| -> Vec<f64> {
        m.runs
            .iter()
            .map(|r| r.trace.steps.last().map_or(f64::NAN, |s| s.diagnostics.estimate.cov[(0, 0)].max(0.0).sqrt()))
            .collect()
    };
    let floor = 1e-3 * scenario.sigma0.sqrt();
    let (rpf_sd, sir_sd) = (final_sd(&rpf), final_sd(&sir));
    Ok(ShiftedPriorReport {
        rpf_sd_ratio: rpf_sd.iter().map(|s| s / kalman_sd).collect(),
        sir_sd_ratio: sir_sd.iter().map(|s| s / kalman_sd).collect(),
        rpf_collapsed: rpf_sd.iter().map(|&s| s < floor).collect(),
        sir_collapsed: sir_sd.iter().map(|&s| s < floor).collect(),
        kalman_sd,
        rpf,
        sir,
    })
}

/// Resampling times of one replicate and the ratios of consecutive spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingRun {
    pub seed: u64,
    pub times: Vec<usize>,
    /// `(t_{k+1} - t_k) / (t_k - t_{k-1})` for `k = 2, 3, ...`.
    pub ratios: Vec<f64>,
}

impl SpacingRun {
    /// At least three resampling events, i.e. one spacing ratio.
    pub fn sufficient(&self) -> bool {
        self.times.len() >= 3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpacingReport {
    pub result: MethodResult,
    pub runs: Vec<SpacingRun>,
    /// `1 + β_crit` for an ESS threshold, 1 for `Always`.
    pub predicted_ratio: Option<f64>,
}

impl SpacingReport {
    /// Method CSVs plus `spacing.csv` (`replicate,event,time,ratio`).
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = self.result.write_csv(dir)?;
        let path = dir.join("spacing.csv");
        let mut out = super::output::writer(std::fs::File::create(&path)?);
        let err = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["replicate", "event", "time", "ratio"]).map_err(err)?;
        for (r, run) in self.runs.iter().enumerate() {
            for (k, t) in run.times.iter().enumerate() {
                // The ratio closing at event k+1 uses events k-1, k, k+1.
                let ratio = if k >= 2 { run.ratios[k - 2] } else { f64::NAN };
                out.write_record([r.to_string(), (k + 1).to_string(), t.to_string(), super::output::float(ratio)])
                    .map_err(err)?;
            }
        }
        out.flush()?;
        written.push(path);
        Ok(written)
    }
}

/// Records resampling times under the configured policy.
pub fn exp_ess_spacing(config: &ExperimentConfig, scenario: &StationaryScenario) -> Result<SpacingReport> {
    scenario.validate()?;
    let predicted_ratio = match config.policy {
        ResamplingPolicy::EssThreshold(e) => Some(1.0 + beta_crit(e)?),
        ResamplingPolicy::Always => Some(1.0),
        _ => None,
    };
    let method = config.method(default_label(config.policy, config.schedule));
    let runs = run_methods(config, std::slice::from_ref(&method), &[0], scenario.sigma0.sqrt(), |key| {
        scenario.data(config.horizon, config.oracle, key)
    })?;
    let result = collect_results(&[method], runs)?.remove(0);
    let runs = result
        .runs
        .iter()
        .map(|r| {
            let times = r.trace.resampling_times();
            let ratios = times.windows(3).map(|w| (w[2] - w[1]) as f64 / (w[1] - w[0]) as f64).collect();
            SpacingRun { seed: r.seed, times, ratios }
        })
        .collect();
    Ok(SpacingReport { result, runs, predicted_ratio })
}
