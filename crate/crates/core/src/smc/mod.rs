//! The particle filter engine.
//!
//! One [`filter_step`] propagates every particle through the model's
//! transition kernel, reweights by the likelihood in log space, and, when
//! the [`ResamplingPolicy`] triggers, resamples systematically and jitters
//! the survivors with a Gaussian kernel whose covariance is `α Σ^N`.
//!
//! SIS is the `Never` policy, the bootstrap filter is `Always` with
//! [`BandwidthSchedule::NoJitter`], and the regularized filter is any policy
//! paired with a jittering schedule.

mod bandwidth;
mod ensemble;
mod filter;
pub mod kde;
mod resample;

pub use bandwidth::{compute_alpha, regularize, rule_of_thumb_alpha, AlphaChoice, BandwidthSchedule};
pub use ensemble::{effective_sample_size, normalize_weights, weighted_mean_cov, ParticleEnsemble, WeightedMoments};
pub use filter::{filter_step, run_filter, FilterConfig, FilterTrace, ResamplingPolicy, StepDiagnostics, TraceStep};
pub use resample::{multinomial_resample, systematic_resample};
