//! Reproducible studies built from the models, the particle filter and the
//! Kalman oracles.
//!
//! Every experiment runs `replicates` independent replicates; replicate `r`
//! uses seed `seed + r`, from which the truth/observation streams and the
//! filter streams are derived. All methods of a replicate filter the same
//! observations. Replicates run in parallel and are folded in index order,
//! so results are bit-for-bit reproducible.

mod lnas;
mod logistic;
mod output;
mod single;
mod stationary;

pub use crate::models::synthetic_weather;
pub use lnas::{exp_lnas, LnasMethodResult, LnasReport, LnasScenario, TableRow};
pub use logistic::{exp_logistic, LogisticReport, LogisticScenario};
pub use output::{write_summary_csv, write_table_csv, write_trace_csv};
pub use single::{exp_filter, Scenario};
pub use stationary::{
    exp_ess_spacing, exp_shifted_prior, exp_stationary, OverlayRow, Quench, ShiftedPriorReport, SpacingReport,
    SpacingRun, StationaryReport, StationaryScenario,
};

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::HmmModel;
use crate::rng::StreamKey;
use crate::smc::{run_filter, BandwidthSchedule, FilterConfig, FilterTrace, ResamplingPolicy};

const TRUTH_TAG: u64 = 1;
const FILTER_TAG: u64 = 2;

/// Settings shared by all experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub n_particles: usize,
    pub policy: ResamplingPolicy,
    pub schedule: BandwidthSchedule,
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Filter noiseless observations (the oracle limit).
    pub oracle: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("need at least one replicate".into()));
        }
        self.filter().validate()
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig::new(self.n_particles, self.policy, self.schedule)
    }

    pub fn method(&self, label: &str) -> Method {
        Method::new(label, self.policy, self.schedule)
    }

    /// Seed of replicate `r`: `seed + r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

/// A named filter variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub label: String,
    pub policy: ResamplingPolicy,
    pub schedule: BandwidthSchedule,
}

impl Method {
    pub fn new(label: &str, policy: ResamplingPolicy, schedule: BandwidthSchedule) -> Self {
        Self { label: label.to_string(), policy, schedule }
    }
}

/// One filter run inside an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRun {
    pub seed: u64,
    pub trace: FilterTrace,
    pub rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub step: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub ess_mean: f64,
}

/// Pointwise statistics across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub rows: Vec<SummaryRow>,
    pub resampling_times: Vec<Vec<usize>>,
}

impl ReplicateSummary {
    pub fn rmse_mean(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rmse_mean).collect()
    }

    /// Mean RMSE over the final 20% of steps.
    pub fn plateau(&self) -> f64 {
        plateau(&self.rmse_mean())
    }
}

/// `sqrt(|μ - x|² + tr Σ) / normalization` per step, restricted to `components`.
///
/// `truth[k]` lists the true values of `components` at step `k + 1`.
pub fn rmse_trace(
    trace: &FilterTrace,
    truth: &[Vec<f64>],
    components: &[usize],
    normalization: f64,
) -> Result<Vec<f64>> {
    if truth.len() < trace.len() {
        return Err(Error::Dimension(format!("{} truth rows for a trace of {} steps", truth.len(), trace.len())));
    }
    if !(normalization > 0.0) {
        return Err(Error::InvalidInput(format!("normalization must be positive, got {normalization}")));
    }
    trace
        .steps
        .iter()
        .zip(truth)
        .map(|(s, x)| {
            if x.len() != components.len() {
                return Err(Error::Dimension(format!(
                    "truth row has {} values for {} components",
                    x.len(),
                    components.len()
                )));
            }
            let est = &s.diagnostics.estimate;
            let mut sq = 0.0;
            for (&c, &xc) in components.iter().zip(x) {
                if c >= est.dim() {
                    return Err(Error::Dimension(format!("component {c} outside state of dimension {}", est.dim())));
                }
                sq += (est.mean[c] - xc).powi(2) + est.cov[(c, c)];
            }
            Ok(sq.sqrt() / normalization)
        })
        .collect()
}

/// Mean of the final 20% of `values` (at least one value).
pub fn plateau(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let tail = (values.len() / 5).max(1);
    values[values.len() - tail..].iter().sum::<f64>() / tail as f64
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pointwise mean and (sample) standard deviation of the RMSE and mean ESS/N.
pub fn average_replicates(runs: &[ReplicateRun]) -> Result<ReplicateSummary> {
    let first = runs.first().ok_or_else(|| Error::InvalidInput("no replicates to average".into()))?;
    let len = first.rmse.len();
    if runs.iter().any(|r| r.rmse.len() != len || r.trace.len() != len) {
        return Err(Error::Dimension("replicate traces have different lengths".into()));
    }
    let rows = (0..len)
        .map(|k| {
            let rmse: Vec<f64> = runs.iter().map(|r| r.rmse[k]).collect();
            let (rmse_mean, rmse_std) = mean_std(&rmse);
            let ess: Vec<f64> =
                runs.iter().map(|r| r.trace.steps[k].diagnostics.ess / r.trace.n_particles as f64).collect();
            SummaryRow { step: first.trace.steps[k].step, rmse_mean, rmse_std, ess_mean: mean_std(&ess).0 }
        })
        .collect();
    Ok(ReplicateSummary { rows, resampling_times: runs.iter().map(|r| r.trace.resampling_times()).collect() })
}

/// All replicates of one method, with their pointwise summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    pub runs: Vec<ReplicateRun>,
    pub summary: ReplicateSummary,
}

impl MethodResult {
    /// Writes `<dir>/<label>/summary.csv` and `<dir>/<label>/rep-<r>/trace.csv`.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let base = dir.join(&self.method.label);
        let mut written = Vec::new();
        for (r, run) in self.runs.iter().enumerate() {
            let rep = base.join(format!("rep-{r}"));
            std::fs::create_dir_all(&rep)?;
            let path = rep.join("trace.csv");
            write_trace_csv(std::fs::File::create(&path)?, &run.trace, &run.rmse)?;
            written.push(path);
        }
        let path = base.join("summary.csv");
        write_summary_csv(std::fs::File::create(&path)?, &self.summary)?;
        written.push(path);
        Ok(written)
    }
}

/// Label used for a policy/schedule pair: `sis`, `sir` or `rpf`.
pub fn default_label(policy: ResamplingPolicy, schedule: BandwidthSchedule) -> &'static str {
    match (policy, schedule) {
        (ResamplingPolicy::Never, _) => "sis",
        (_, BandwidthSchedule::NoJitter) => "sir",
        _ => "rpf",
    }
}

pub(crate) fn collect_results(methods: &[Method], runs: Vec<Vec<ReplicateRun>>) -> Result<Vec<MethodResult>> {
    methods
        .iter()
        .zip(runs)
        .map(|(m, runs)| {
            let summary = average_replicates(&runs)?;
            Ok(MethodResult { method: m.clone(), runs, summary })
        })
        .collect()
}

/// Data for one replicate: model, observations, and truth rows for the RMSE.
pub(crate) struct ReplicateData<M> {
    pub model: M,
    pub observations: Vec<Vec<f64>>,
    pub truth: Vec<Vec<f64>>,
}

/// Runs every method on every replicate; result is indexed `[method][replicate]`.
///
/// `build` receives the truth key of the replicate. A degenerate run aborts
/// the experiment with [`Error::Degeneracy`].
pub(crate) fn run_methods<M, F>(
    config: &ExperimentConfig,
    methods: &[Method],
    components: &[usize],
    normalization: f64,
    build: F,
) -> Result<Vec<Vec<ReplicateRun>>>
where
    M: HmmModel + Send,
    F: Fn(StreamKey) -> Result<ReplicateData<M>> + Sync,
{
    config.validate()?;
    let per_replicate: Vec<Result<Vec<ReplicateRun>>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = config.replicate_seed(r);
            let root = StreamKey::new(seed);
            let data = build(root.derive(TRUTH_TAG))?;
            let filter_seed = root.derive(FILTER_TAG).seed();
            methods
                .iter()
                .map(|m| {
                    let fc = FilterConfig::new(config.n_particles, m.policy, m.schedule);
                    let trace = run_filter(&data.model, &data.observations, &fc, filter_seed)?;
                    if let Some(step) = trace.degeneracy {
                        return Err(Error::Degeneracy { step });
                    }
                    let rmse = rmse_trace(&trace, &data.truth, components, normalization)?;
                    Ok(ReplicateRun { seed, trace, rmse })
                })
                .collect()
        })
        .collect();
    let mut out: Vec<Vec<ReplicateRun>> = methods.iter().map(|_| Vec::with_capacity(config.replicates)).collect();
    for runs in per_replicate {
        for (m, run) in runs?.into_iter().enumerate() {
            out[m].push(run);
        }
    }
    Ok(out)
}
