use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::kalman::AlphaSequence;
use crate::linalg::psd_sqrt;
use crate::models::GaussianBelief;
use crate::rng::{Purpose, StreamKey};

/// `α_h = (4 / (N (d + 2)))^{2/(d+4)}`: the squared Gaussian-kernel bandwidth
/// minimizing the MISE for a Gaussian target.
pub fn rule_of_thumb_alpha(n_particles: usize, dim: usize) -> f64 {
    let (n, d) = (n_particles as f64, dim as f64);
    (4.0 / (n * (d + 2.0))).powf(2.0 / (d + 4.0))
}

/// How the jitter scale `α_n` evolves with the step index.
///
/// `None` in a variant means "use the rule-of-thumb `α_h`".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthSchedule {
    /// Constant rule-of-thumb `α_h`.
    RuleOfThumb,
    /// Constant `(4/N)^{2/3}`.
    Silverman1d,
    /// `α_h / (1 + n α_h)`.
    Harmonic(Option<f64>),
    /// `α_h exp(-n α_h)`.
    ExponentialDecay(Option<f64>),
    /// Shrink towards the weighted mean by `a = sqrt(1 - α_h)`, then jitter with `α_h`.
    WestShrinkage(Option<f64>),
    NoJitter,
}

/// Output of [`compute_alpha`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaChoice {
    pub alpha: f64,
    /// West shrink factor `a`, if any.
    pub shrink: Option<f64>,
}

impl BandwidthSchedule {
    fn base(&self, n_particles: usize, dim: usize) -> f64 {
        match self {
            Self::Harmonic(Some(a)) | Self::ExponentialDecay(Some(a)) | Self::WestShrinkage(Some(a)) => *a,
            _ => rule_of_thumb_alpha(n_particles, dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Harmonic(Some(a)) | Self::ExponentialDecay(Some(a)) if !(a.is_finite() && *a >= 0.0) => {
                Err(Error::Config(format!("bandwidth must be a non-negative number, got {a}")))
            }
            Self::WestShrinkage(Some(a)) if !(*a >= 0.0 && *a <= 1.0) => {
                Err(Error::Config(format!("West shrinkage needs alpha in [0, 1], got {a}")))
            }
            _ => Ok(()),
        }
    }

    /// The sequence the Kalman closed form sees when this schedule runs with
    /// resampling at every step.
    pub fn alpha_sequence(&self, n_particles: usize, dim: usize) -> AlphaSequence {
        let a = self.base(n_particles, dim);
        match self {
            Self::RuleOfThumb => AlphaSequence::Constant(a),
            Self::Silverman1d => AlphaSequence::Constant((4.0 / n_particles as f64).powf(2.0 / 3.0)),
            Self::Harmonic(_) => AlphaSequence::Harmonic(a),
            Self::ExponentialDecay(_) => AlphaSequence::ExponentialDecay(a),
            Self::WestShrinkage(_) | Self::NoJitter => AlphaSequence::Zero,
        }
    }
}

impl fmt::Display for BandwidthSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let with = |f: &mut fmt::Formatter<'_>, name: &str, a: &Option<f64>| match a {
            Some(a) => write!(f, "{name}:{a}"),
            None => write!(f, "{name}"),
        };
        match self {
            Self::RuleOfThumb => write!(f, "rule-of-thumb"),
            Self::Silverman1d => write!(f, "silverman"),
            Self::Harmonic(a) => with(f, "harmonic", a),
            Self::ExponentialDecay(a) => with(f, "exp-decay", a),
            Self::WestShrinkage(a) => with(f, "west", a),
            Self::NoJitter => write!(f, "none"),
        }
    }
}

impl FromStr for BandwidthSchedule {
    type Err = Error;

    /// Parses `rule-of-thumb`, `silverman`, `harmonic[:α]`, `exp-decay[:α]`, `west[:α]` or `none`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let alpha = arg
            .map(|a| {
                a.parse::<f64>().map_err(|_| Error::Config(format!("bad bandwidth value '{a}' in schedule '{s}'")))
            })
            .transpose()?;
        let schedule = match (name, alpha) {
            ("rule-of-thumb", None) => Self::RuleOfThumb,
            ("silverman", None) => Self::Silverman1d,
            ("harmonic", a) => Self::Harmonic(a),
            ("exp-decay", a) => Self::ExponentialDecay(a),
            ("west", a) => Self::WestShrinkage(a),
            ("none", None) => Self::NoJitter,
            _ => {
                return Err(Error::Config(format!(
                    "unknown schedule '{s}'; expected rule-of-thumb, silverman, harmonic[:a], exp-decay[:a], west[:a] or none"
                )))
            }
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// `α_n` for step `n` (1-based) with `N` particles in `d` dimensions.
pub fn compute_alpha(schedule: BandwidthSchedule, n: usize, n_particles: usize, dim: usize) -> AlphaChoice {
    let a = schedule.base(n_particles, dim);
    let nf = n as f64;
    match schedule {
        BandwidthSchedule::RuleOfThumb => AlphaChoice { alpha: a, shrink: None },
        BandwidthSchedule::Silverman1d => {
            AlphaChoice { alpha: (4.0 / n_particles as f64).powf(2.0 / 3.0), shrink: None }
        }
        BandwidthSchedule::Harmonic(_) => AlphaChoice { alpha: a / (1.0 + nf * a), shrink: None },
        BandwidthSchedule::ExponentialDecay(_) => AlphaChoice { alpha: a * (-nf * a).exp(), shrink: None },
        BandwidthSchedule::WestShrinkage(_) => {
            let a = a.min(1.0);
            AlphaChoice { alpha: a, shrink: Some((1.0 - a).sqrt()) }
        }
        BandwidthSchedule::NoJitter => AlphaChoice { alpha: 0.0, shrink: None },
    }
}

/// Moves each particle to `a x + (1 - a) μ` (when shrinking) and adds
/// `N(0, α Σ)` noise, then resets the weights to uniform.
///
/// `belief` is the weighted pre-selection estimate. Particle `i` draws from
/// the `(Jitter, step, i)` stream. Returns `false` when the jitter was
/// skipped because `Σ` is zero.
pub fn regularize(
    ensemble: &mut ParticleEnsemble,
    belief: &GaussianBelief,
    alpha: f64,
    shrink: Option<f64>,
    key: StreamKey,
    step: usize,
) -> bool {
    ensemble.reset_weights();
    let d = ensemble.dim();
    let zero_cov = belief.cov.iter().all(|&v| v == 0.0);
    let jitter = alpha > 0.0 && !zero_cov;
    let skipped = alpha > 0.0 && zero_cov;
    if !jitter && shrink.is_none() {
        return !skipped;
    }
    let root = psd_sqrt(&belief.cov) * alpha.max(0.0).sqrt();
    let mean = &belief.mean;
    ensemble.states_mut().par_chunks_mut(d).with_min_len(256).enumerate().for_each(|(i, x)| {
        if let Some(a) = shrink {
            for k in 0..d {
                x[k] = a * x[k] + (1.0 - a) * mean[k];
            }
        }
        if jitter {
            let mut rng = key.stream(Purpose::Jitter, step as u64, i as u64);
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            for r in 0..d {
                x[r] += (0..d).map(|c| root[(r, c)] * z[c]).sum::<f64>();
            }
        }
    });
    !skipped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};
    use crate::smc::weighted_mean_cov;
    use proptest::prelude::*;

    #[test]
    fn rule_of_thumb_example() {
        let a = compute_alpha(BandwidthSchedule::RuleOfThumb, 1, 1000, 1).alpha;
        assert!((a - (4.0f64 / 3000.0).powf(0.4)).abs() < 1e-15);
        assert!((a - 0.0708).abs() < 5e-5);
    }

    #[test]
    fn silverman_example() {
        let a = compute_alpha(BandwidthSchedule::Silverman1d, 1, 1000, 1).alpha;
        assert!((a - 0.02520).abs() < 5e-6);
    }

    #[test]
    fn harmonic_rate() {
        let ah = rule_of_thumb_alpha(1000, 1);
        for n in [10usize, 1000, 100_000, 10_000_000] {
            let a = compute_alpha(BandwidthSchedule::Harmonic(None), n, 1000, 1).alpha;
            assert!(a <= ah);
            if n >= 100_000 {
                assert!((n as f64 * a - 1.0).abs() < 2.0 / (n as f64 * ah));
            }
        }
    }

    #[test]
    fn west_shrink_factor() {
        let c = compute_alpha(BandwidthSchedule::WestShrinkage(Some(0.19)), 3, 10, 1);
        assert_eq!(c.alpha, 0.19);
        assert!((c.shrink.unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn schedules_round_trip_through_strings() {
        for s in [
            BandwidthSchedule::RuleOfThumb,
            BandwidthSchedule::Silverman1d,
            BandwidthSchedule::Harmonic(None),
            BandwidthSchedule::Harmonic(Some(0.05)),
            BandwidthSchedule::ExponentialDecay(Some(0.1)),
            BandwidthSchedule::WestShrinkage(None),
            BandwidthSchedule::NoJitter,
        ] {
            assert_eq!(s.to_string().parse::<BandwidthSchedule>().unwrap(), s);
        }
        assert!("west:1.5".parse::<BandwidthSchedule>().is_err());
        assert!("gaussian".parse::<BandwidthSchedule>().is_err());
        assert!("harmonic:x".parse::<BandwidthSchedule>().is_err());
    }

    fn scalar_ensemble(n: usize, seed: u64) -> ParticleEnsemble {
        let mut rng = StreamKey::new(seed).stream(Purpose::Auxiliary, 0, 0);
        let xs: Vec<f64> = (0..n).map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng) + 1.0).collect();
        ParticleEnsemble::uniform(1, xs).unwrap()
    }

    #[test]
    fn zero_alpha_leaves_states() {
        let mut e = scalar_ensemble(50, 1);
        let before = e.clone();
        let m = weighted_mean_cov(&e);
        assert!(regularize(&mut e, &m.belief, 0.0, None, StreamKey::new(2), 1));
        assert_eq!(e, before);
    }

    #[test]
    fn zero_covariance_skips_jitter() {
        let mut e = ParticleEnsemble::uniform(1, vec![3.0; 10]).unwrap();
        let b = GaussianBelief { mean: Vector::from_element(1, 3.0), cov: Matrix::zeros(1, 1) };
        assert!(!regularize(&mut e, &b, 0.1, None, StreamKey::new(2), 1));
        assert!(e.states().iter().all(|&x| x == 3.0));
    }

    /// Over replicates, the post-jitter variance is `(1 + α) Σ`, or `Σ` with West shrinkage.
    #[test]
    fn jitter_adds_alpha_sigma() {
        let alpha = 0.3;
        let reps = 400;
        let (mut plain, mut west) = (Vec::new(), Vec::new());
        for r in 0..reps {
            let base = scalar_ensemble(200, 100 + r);
            let m = weighted_mean_cov(&base);
            let s = m.belief.cov[(0, 0)];
            let mut e = base.clone();
            regularize(&mut e, &m.belief, alpha, None, StreamKey::new(r), 1);
            plain.push(weighted_mean_cov(&e).belief.cov[(0, 0)] / s);
            let mut e = base;
            let shrink = compute_alpha(BandwidthSchedule::WestShrinkage(Some(alpha)), 1, 200, 1).shrink;
            regularize(&mut e, &m.belief, alpha, shrink, StreamKey::new(r), 1);
            west.push(weighted_mean_cov(&e).belief.cov[(0, 0)] / s);
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            (m, sd / (v.len() as f64).sqrt())
        };
        let (m, se) = stats(&plain);
        assert!((m - (1.0 + alpha)).abs() < 3.0 * se, "{m} ± {se}");
        let (m, se) = stats(&west);
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn jitter_uses_full_covariance() {
        let n = 20_000;
        let mut e = ParticleEnsemble::uniform(2, vec![0.0; 2 * n]).unwrap();
        let cov = Matrix::from_row_slice(2, 2, &[2.0, 0.8, 0.8, 1.0]);
        let b = GaussianBelief { mean: Vector::zeros(2), cov: cov.clone() };
        regularize(&mut e, &b, 0.5, None, StreamKey::new(5), 1);
        let got = weighted_mean_cov(&e).belief.cov;
        assert!((got - cov * 0.5).amax() < 0.05);
    }

    proptest! {
        #[test]
        fn alphas_are_non_negative(n in 1usize..100_000, np in 2usize..100_000, d in 1usize..6, a in 0.0f64..1.0) {
            for s in [
                BandwidthSchedule::RuleOfThumb,
                BandwidthSchedule::Silverman1d,
                BandwidthSchedule::Harmonic(Some(a)),
                BandwidthSchedule::ExponentialDecay(None),
                BandwidthSchedule::WestShrinkage(Some(a)),
                BandwidthSchedule::NoJitter,
            ] {
                let c = compute_alpha(s, n, np, d);
                prop_assert!(c.alpha >= 0.0 && c.alpha.is_finite());
            }
        }
    }
}
