use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::ensemble::log_normalize;
use super::{compute_alpha, effective_sample_size, regularize, systematic_resample, weighted_mean_cov};
use super::{BandwidthSchedule, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::models::{GaussianBelief, HmmModel};
use crate::rng::{Purpose, StreamKey};

/// When to resample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResamplingPolicy {
    Always,
    /// Sequential importance sampling.
    Never,
    /// At steps that are multiples of `p` (steps count from 1).
    Periodic(usize),
    /// When `ESS/N < ess_crit` (strict).
    EssThreshold(f64),
}

impl ResamplingPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Periodic(0) => Err(Error::Config("resampling period must be at least 1".into())),
            Self::EssThreshold(e) if !(e > 0.0 && e < 1.0) => Err(Error::Config(format!(
                "ESS threshold must lie strictly inside (0, 1), got {e}; use 'always' or 'never' instead"
            ))),
            _ => Ok(()),
        }
    }

    pub fn triggers(&self, step: usize, ess: f64, n_particles: usize) -> bool {
        match *self {
            Self::Always => true,
            Self::Never => false,
            Self::Periodic(p) => step.is_multiple_of(p),
            Self::EssThreshold(e) => ess / (n_particles as f64) < e,
        }
    }
}

impl fmt::Display for ResamplingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Always => write!(f, "always"),
            Self::Never => write!(f, "never"),
            Self::Periodic(p) => write!(f, "periodic:{p}"),
            Self::EssThreshold(e) => write!(f, "ess:{e}"),
        }
    }
}

impl FromStr for ResamplingPolicy {
    type Err = Error;

    /// Parses `always`, `never`, `periodic:<p>` or `ess:<threshold>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::Config(format!("unknown policy '{s}'; expected always, never, periodic:<p> or ess:<threshold>"));
        let policy = match s.split_once(':') {
            None if s == "always" => Self::Always,
            None if s == "never" => Self::Never,
            Some(("periodic", p)) => Self::Periodic(p.parse().map_err(|_| bad())?),
            Some(("ess", e)) => Self::EssThreshold(e.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub policy: ResamplingPolicy,
    pub schedule: BandwidthSchedule,
}

impl FilterConfig {
    pub fn new(n_particles: usize, policy: ResamplingPolicy, schedule: BandwidthSchedule) -> Self {
        Self { n_particles, policy, schedule }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config(format!("need at least 2 particles, got {}", self.n_particles)));
        }
        self.policy.validate()?;
        self.schedule.validate()
    }
}

/// What happened at one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// ESS after reweighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    /// Log of the one-step predictive likelihood estimate.
    pub log_marginal_increment: f64,
    /// `α` applied at this step (0 when no resampling happened).
    pub alpha_used: f64,
    /// Posterior estimate: weighted mean, and the weighted covariance scaled
    /// by `a² + α` when the particles were regularized.
    pub estimate: GaussianBelief,
    /// The weighted covariance was zero because one particle held all the weight.
    pub degenerate_covariance: bool,
    /// Jitter was requested but skipped because the covariance was zero.
    pub jitter_skipped: bool,
}

/// Runs one step: propagate, reweight, and resample/regularize if the policy says so.
///
/// Particle `i` draws its transition noise from the `(Transition, step, i)`
/// stream and the resampler uses `(Resample, step, 0)`, so the outcome does
/// not depend on the thread count.
pub fn filter_step<M: HmmModel + ?Sized>(
    model: &M,
    ensemble: &mut ParticleEnsemble,
    y: &[f64],
    step: usize,
    config: &FilterConfig,
    key: StreamKey,
) -> Result<StepDiagnostics> {
    if y.len() != model.obs_dim() {
        return Err(Error::Dimension(format!(
            "observation at step {step} has length {}, model expects {}",
            y.len(),
            model.obs_dim()
        )));
    }
    let d = ensemble.dim();
    let n = ensemble.len();
    let (states, log_weights) = ensemble.parts_mut();
    states.par_chunks_mut(d).zip(log_weights.par_iter_mut()).enumerate().with_min_len(256).for_each(|(i, (x, lw))| {
        model.transition_sample(x, step, &mut key.stream(Purpose::Transition, step as u64, i as u64));
        *lw += model.log_likelihood(y, x, step);
    });

    let log_marginal_increment = log_normalize(ensemble.log_weights_mut()).map_err(|e| match e {
        Error::Degeneracy { .. } => Error::Degeneracy { step },
        other => other,
    })?;
    let weights = ensemble.weights();
    let ess = effective_sample_size(&weights);
    let moments = weighted_mean_cov(ensemble);

    let mut diag = StepDiagnostics {
        ess,
        resampled: false,
        log_marginal_increment,
        alpha_used: 0.0,
        estimate: moments.belief.clone(),
        degenerate_covariance: moments.degenerate,
        jitter_skipped: false,
    };
    if !config.policy.triggers(step, ess, n) {
        return Ok(diag);
    }

    let indices = systematic_resample(&weights, &mut key.stream(Purpose::Resample, step as u64, 0));
    ensemble.select(&indices);
    let choice = compute_alpha(config.schedule, step, n, d);
    let regularized = choice.alpha > 0.0 || choice.shrink.is_some();
    if regularized {
        diag.jitter_skipped = !regularize(ensemble, &moments.belief, choice.alpha, choice.shrink, key, step);
        ensemble.states_mut().par_chunks_mut(d).with_min_len(256).for_each(|x| model.project(x));
    }
    let a = choice.shrink.unwrap_or(1.0);
    diag.resampled = true;
    diag.alpha_used = choice.alpha;
    diag.estimate.cov = &moments.belief.cov * (a * a + choice.alpha);
    Ok(diag)
}

/// One row of a [`FilterTrace`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    /// Cumulative log marginal likelihood estimate up to this step.
    pub log_marginal: f64,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrace {
    pub n_particles: usize,
    pub steps: Vec<TraceStep>,
    /// Step at which every particle got zero likelihood; the trace stops before it.
    pub degeneracy: Option<usize>,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn resampling_times(&self) -> Vec<usize> {
        self.steps.iter().filter(|s| s.diagnostics.resampled).map(|s| s.step).collect()
    }

    pub fn final_log_marginal(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.log_marginal)
    }

    pub fn ess_norm(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.diagnostics.ess / self.n_particles as f64).collect()
    }
}

/// Filters `observations[k]` as `y_{k+1}`, starting from `N` prior draws.
///
/// The result is fully determined by `seed`. A degeneracy stops the run and
/// is recorded in [`FilterTrace::degeneracy`]; other errors are returned.
pub fn run_filter<M: HmmModel + ?Sized>(
    model: &M,
    observations: &[Vec<f64>],
    config: &FilterConfig,
    seed: u64,
) -> Result<FilterTrace> {
    config.validate()?;
    if observations.is_empty() {
        return Err(Error::Config("need at least one observation".into()));
    }
    let key = StreamKey::new(seed);
    let mut ensemble = ParticleEnsemble::from_prior(model, config.n_particles, key)?;
    let mut steps = Vec::with_capacity(observations.len());
    let mut log_marginal = 0.0;
    let mut degeneracy = None;
    for (k, y) in observations.iter().enumerate() {
        let step = k + 1;
        match filter_step(model, &mut ensemble, y, step, config, key) {
            Ok(diagnostics) => {
                log_marginal += diagnostics.log_marginal_increment;
                steps.push(TraceStep { step, log_marginal, diagnostics });
            }
            Err(Error::Degeneracy { step }) => {
                degeneracy = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FilterTrace { n_particles: config.n_particles, steps, degeneracy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::{ess_asymptotic, kalman_log_evidence, perturbed_recursion_step};
    use crate::linalg::{Matrix, Vector};
    use crate::models::{simulate_observations, StationaryLinearModel};
    use crate::smc::rule_of_thumb_alpha;

    fn stationary_data(seed: u64, n: usize) -> (StationaryLinearModel, Vec<Vec<f64>>) {
        let model = StationaryLinearModel::scalar(1.0, 1.0, 0.25).unwrap();
        let sim = simulate_observations(&model, &[0.0], n, StreamKey::new(seed).derive(1), false).unwrap();
        (model, sim.observations)
    }

    #[test]
    fn policy_strings_round_trip() {
        for p in [
            ResamplingPolicy::Always,
            ResamplingPolicy::Never,
            ResamplingPolicy::Periodic(3),
            ResamplingPolicy::EssThreshold(0.5),
        ] {
            assert_eq!(p.to_string().parse::<ResamplingPolicy>().unwrap(), p);
        }
        for bad in ["ess:1", "ess:0", "periodic:0", "sometimes", "ess:x"] {
            assert!(bad.parse::<ResamplingPolicy>().is_err(), "{bad}");
        }
    }

    #[test]
    fn periodic_counts_from_one_and_threshold_is_strict() {
        let p = ResamplingPolicy::Periodic(3);
        let hits: Vec<usize> = (1..=9).filter(|&n| p.triggers(n, 0.0, 10)).collect();
        assert_eq!(hits, vec![3, 6, 9]);
        let e = ResamplingPolicy::EssThreshold(0.5);
        assert!(!e.triggers(1, 50.0, 100));
        assert!(e.triggers(1, 49.999, 100));
    }

    #[test]
    fn same_seed_same_trace() {
        let (model, ys) = stationary_data(1, 50);
        let cfg = FilterConfig::new(300, ResamplingPolicy::EssThreshold(0.5), BandwidthSchedule::RuleOfThumb);
        assert_eq!(run_filter(&model, &ys, &cfg, 9).unwrap(), run_filter(&model, &ys, &cfg, 9).unwrap());
        assert_ne!(run_filter(&model, &ys, &cfg, 9).unwrap(), run_filter(&model, &ys, &cfg, 10).unwrap());
    }

    #[test]
    fn two_particles_run() {
        let (model, ys) = stationary_data(2, 20);
        let cfg = FilterConfig::new(2, ResamplingPolicy::Always, BandwidthSchedule::RuleOfThumb);
        let t = run_filter(&model, &ys, &cfg, 1).unwrap();
        assert_eq!(t.len(), 20);
        assert!(t.degeneracy.is_none());
    }

    #[test]
    fn rejects_single_particle() {
        let (model, ys) = stationary_data(2, 5);
        let cfg = FilterConfig::new(1, ResamplingPolicy::Always, BandwidthSchedule::RuleOfThumb);
        assert!(matches!(run_filter(&model, &ys, &cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn weights_sum_to_one_and_ess_resets() {
        let (model, ys) = stationary_data(3, 40);
        let cfg = FilterConfig::new(500, ResamplingPolicy::EssThreshold(0.5), BandwidthSchedule::RuleOfThumb);
        let key = StreamKey::new(4);
        let mut e = ParticleEnsemble::from_prior(&model, 500, key).unwrap();
        for (k, y) in ys.iter().enumerate() {
            let diag = filter_step(&model, &mut e, y, k + 1, &cfg, key).unwrap();
            let sum: f64 = e.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(diag.ess >= 1.0 && diag.ess <= 500.0);
            if diag.resampled {
                assert!((effective_sample_size(&e.weights()) - 500.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sis_never_moves_particles() {
        let (model, ys) = stationary_data(5, 30);
        let cfg = FilterConfig::new(100, ResamplingPolicy::Never, BandwidthSchedule::RuleOfThumb);
        let key = StreamKey::new(6);
        let mut e = ParticleEnsemble::from_prior(&model, 100, key).unwrap();
        let initial = e.states().to_vec();
        let mut expected = e.log_weights().to_vec();
        for (k, y) in ys.iter().enumerate() {
            filter_step(&model, &mut e, y, k + 1, &cfg, key).unwrap();
            for (i, lw) in expected.iter_mut().enumerate() {
                *lw += model.log_likelihood(y, &initial[i..i + 1], k + 1);
            }
        }
        assert_eq!(e.states(), &initial[..]);
        let mut ens = ParticleEnsemble::new(1, initial, expected).unwrap();
        crate::smc::normalize_weights(&mut ens).unwrap();
        for (a, b) in ens.weights().iter().zip(e.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_filter_does_not_jitter() {
        let (model, ys) = stationary_data(7, 10);
        let cfg = FilterConfig::new(200, ResamplingPolicy::Always, BandwidthSchedule::NoJitter);
        let key = StreamKey::new(8);
        let mut e = ParticleEnsemble::from_prior(&model, 200, key).unwrap();
        let initial: Vec<f64> = e.states().to_vec();
        for (k, y) in ys.iter().enumerate() {
            let d = filter_step(&model, &mut e, y, k + 1, &cfg, key).unwrap();
            assert!(d.resampled && d.alpha_used == 0.0);
        }
        assert!(e.states().iter().all(|x| initial.contains(x)));
    }

    #[test]
    fn degeneracy_is_recorded_with_step() {
        struct Picky;
        impl HmmModel for Picky {
            fn state_dim(&self) -> usize {
                1
            }
            fn obs_dim(&self) -> usize {
                1
            }
            fn prior_sample(&self, _: &mut crate::models::StreamRng, out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn transition_sample(&self, _: &mut [f64], _: usize, _: &mut crate::models::StreamRng) {}
            fn log_likelihood(&self, y: &[f64], _: &[f64], _: usize) -> f64 {
                if y[0] > 0.0 {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            fn observe(&self, x: &[f64], _: usize, _: &mut crate::models::StreamRng, _: bool) -> Vec<f64> {
                x.to_vec()
            }
        }
        let ys = vec![vec![0.0], vec![0.0], vec![1.0], vec![0.0]];
        let cfg = FilterConfig::new(10, ResamplingPolicy::Always, BandwidthSchedule::NoJitter);
        let t = run_filter(&Picky, &ys, &cfg, 1).unwrap();
        assert_eq!(t.degeneracy, Some(3));
        assert_eq!(t.len(), 2);
    }

    /// With `Always` and a constant bandwidth the particle mean and variance
    /// follow the perturbed Kalman recursion.
    #[test]
    fn regularized_filter_tracks_perturbed_recursion() {
        let n_particles = 100_000;
        let (model, ys) = stationary_data(11, 50);
        let cfg = FilterConfig::new(n_particles, ResamplingPolicy::Always, BandwidthSchedule::RuleOfThumb);
        let alpha = rule_of_thumb_alpha(n_particles, 1);
        let trace = run_filter(&model, &ys, &cfg, 12).unwrap();
        let r = Matrix::from_element(1, 1, 0.25);
        let mut belief = model.prior().clone();
        for (k, y) in ys.iter().enumerate() {
            belief = perturbed_recursion_step(&belief, &Vector::from_vec(y.clone()), &r, alpha).unwrap();
            let est = &trace.steps[k].diagnostics.estimate;
            let var = belief.cov[(0, 0)];
            // Standard errors of a sample mean and a sample variance.
            let se_mean = (var / n_particles as f64).sqrt();
            let se_var = var * (2.0 / n_particles as f64).sqrt();
            // Resampling noise accumulates across steps; allow for it in the mean.
            assert!((est.mean[0] - belief.mean[0]).abs() < 3.0 * se_mean * ((k + 1) as f64).sqrt(), "step {}", k + 1);
            assert!((est.cov[(0, 0)] - var).abs() < 3.0 * se_var * ((k + 1) as f64).sqrt() + 1e-12, "step {}", k + 1);
        }
    }

    #[test]
    fn sis_ess_follows_asymptotic_law() {
        let n_particles = 100_000;
        let (model, ys) = stationary_data(13, 100);
        let cfg = FilterConfig::new(n_particles, ResamplingPolicy::Never, BandwidthSchedule::NoJitter);
        let trace = run_filter(&model, &ys, &cfg, 14).unwrap();
        let mut sum = 0.0;
        for (k, y) in ys.iter().enumerate() {
            sum += y[0];
            let n = k + 1;
            let law = ess_asymptotic(n, 1.0, 1.0, 0.25, sum / n as f64).unwrap();
            let got = trace.steps[k].diagnostics.ess / n_particles as f64;
            assert!((got - law).abs() < 0.03 * law, "n={n}: {got} vs {law}");
        }
    }

    #[test]
    fn log_marginal_matches_kalman_evidence() {
        let n_particles = 100_000;
        let (model, ys) = stationary_data(15, 20);
        let cfg = FilterConfig::new(n_particles, ResamplingPolicy::Never, BandwidthSchedule::NoJitter);
        let trace = run_filter(&model, &ys, &cfg, 16).unwrap();
        let id = Matrix::identity(1, 1);
        let yv: Vec<Vector> = ys.iter().map(|y| Vector::from_vec(y.clone())).collect();
        let exact =
            kalman_log_evidence(model.prior(), &id, &id, &Matrix::zeros(1, 1), &Matrix::from_element(1, 1, 0.25), &yv)
                .unwrap();
        // Relative standard error of the estimate is sqrt((N/ESS - 1)/N).
        let ess = trace.steps.last().unwrap().diagnostics.ess;
        let rel_se = ((n_particles as f64 / ess - 1.0) / n_particles as f64).sqrt();
        let ratio = (trace.final_log_marginal() - exact).exp();
        assert!((ratio - 1.0).abs() < 3.0 * rel_se, "ratio {ratio}, se {rel_se}");
    }
}
