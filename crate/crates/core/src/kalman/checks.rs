//! Self-check suite for the analytic layer, run by `rpf oracle-check`.
//!
//! Each check compares two independent routes (or a route against a law)
//! and reports the worst discrepancy it saw.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::rng::{Purpose, StreamKey};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

fn random_spd(d: usize, rng: &mut crate::models::StreamRng) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    symmetrize(&(&g * g.transpose() + Matrix::identity(d, d) * 0.1))
}

fn random_vector(d: usize, rng: &mut crate::models::StreamRng) -> Vector {
    Vector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(f64::MIN_POSITIVE)
}

/// Information form against gain form on random SPD instances, `d <= 4`.
pub fn check_update_forms(key: StreamKey, instances: usize) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..instances {
        let mut rng = key.stream(Purpose::Auxiliary, 1, i as u64);
        let d = rng.random_range(1..=4);
        let dy = rng.random_range(1..=4);
        let prior = GaussianBelief { mean: random_vector(d, &mut rng), cov: random_spd(d, &mut rng) };
        let b = Matrix::from_fn(dy, d, |_, _| StandardNormal.sample(&mut rng));
        let r = random_spd(dy, &mut rng);
        let y = random_vector(dy, &mut rng);
        match (kalman_update(&prior, &y, &b, &r), kalman_update_gain(&prior, &y, &b, &r)) {
            (Ok(info), Ok(gain)) => {
                let mean_scale = 1.0 + info.mean.amax();
                worst = worst.max(rel_diff(&info.cov, &gain.cov)).max((&info.mean - &gain.mean).amax() / mean_scale);
            }
            _ => failures += 1,
        }
    }
    CheckOutcome::new(
        "kalman information form == gain form (1e-10)",
        failures == 0 && worst <= 1e-10,
        format!("{instances} instances, worst relative difference {worst:.3e}"),
    )
}

/// Closed-form perturbed posterior against the step-by-step recursion.
pub fn check_lemma_vs_recursion(key: StreamKey, runs: usize, n_max: usize) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for run in 0..runs {
        let mut rng = key.stream(Purpose::Auxiliary, 2, run as u64);
        let n = rng.random_range(1..=n_max);
        let s0 = 0.1 + 3.0 * rng.random::<f64>();
        let r = 0.05 + 2.0 * rng.random::<f64>();
        let prior = GaussianBelief::scalar(rng.random::<f64>() * 4.0 - 2.0, s0);
        let alphas: Vec<f64> = (0..n).map(|_| 0.3 * rng.random::<f64>()).collect();
        let ys: Vec<Vector> = (0..n).map(|_| Vector::from_element(1, rng.random::<f64>() * 2.0 - 1.0)).collect();
        let seq = AlphaSequence::Explicit(alphas);
        let r = Matrix::from_element(1, 1, r);
        let lemma = match lemma_closed_form(&prior, &r, &ys, &seq) {
            Ok(l) => l,
            Err(e) => return CheckOutcome::new("perturbed closed form == recursion (1e-10)", false, e.to_string()),
        };
        let mut rec = prior.clone();
        for (i, y) in ys.iter().enumerate() {
            rec = perturbed_recursion_step(&rec, y, &r, seq.alpha(i + 1)).expect("valid inputs");
        }
        worst =
            worst.max(rel_diff(&lemma.cov, &rec.cov)).max((&lemma.mean - &rec.mean).amax() / (1.0 + rec.mean.amax()));
    }
    CheckOutcome::new(
        "perturbed closed form == recursion (1e-10)",
        worst <= 1e-10,
        format!("{runs} random sequences, n <= {n_max}, worst relative difference {worst:.3e}"),
    )
}

/// Iterated updates against the stationary closed form, plus the Cramér–Rao limit.
pub fn check_stationary_law(key: StreamKey, n_max: usize) -> CheckOutcome {
    let mut rng = key.stream(Purpose::Auxiliary, 3, 0);
    let (s0, r) = (1.0, 0.25);
    let prior = GaussianBelief::scalar(1.0, s0);
    let rm = Matrix::from_element(1, 1, r);
    let id = Matrix::identity(1, 1);
    let mut belief = prior.clone();
    let mut sum = 0.0;
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        let z: f64 = StandardNormal.sample(&mut rng);
        let y = 0.5 * z;
        sum += y;
        let yv = Vector::from_element(1, y);
        belief = kalman_update(&belief, &yv, &id, &rm).expect("valid inputs");
        let exact =
            stationary_closed_form(n, &prior, &rm, &Vector::from_element(1, sum / n as f64)).expect("valid inputs");
        worst = worst
            .max(rel_diff(&exact.cov, &belief.cov))
            .max((exact.mean[0] - belief.mean[0]).abs() / (1.0 + exact.mean[0].abs()));
    }
    let cr = belief.cov[(0, 0)] * n_max as f64 / r;
    CheckOutcome::new(
        "stationary closed form == iterated update (1e-10); n Σ_n / R -> 1 (1e-3)",
        worst <= 1e-10 && (cr - 1.0).abs() <= 1e-3,
        format!("n <= {n_max}, worst relative difference {worst:.3e}, n Σ_n / R = {cr:.6}"),
    )
}

pub fn check_monotone_contraction() -> CheckOutcome {
    let path = lemma_covariance_path(10_000, 1.0, 0.25, &AlphaSequence::Zero).expect("valid inputs");
    let ok = path[0] < 1.0 && path.windows(2).all(|w| w[1] < w[0]);
    CheckOutcome::new("zero bandwidth: Σ_n strictly decreasing", ok, format!("Σ_10000 = {:.6e}", path[path.len() - 1]))
}

pub fn check_fixed_point_attraction(alpha_h: f64) -> CheckOutcome {
    let r = 0.25;
    let target = alpha_h * r;
    let n = (30.0 / alpha_h).ceil() as usize;
    let path = lemma_covariance_path(n, 1.0, r, &AlphaSequence::Constant(alpha_h)).expect("valid inputs");
    let err: Vec<f64> = path.iter().map(|s| (s - target).abs()).collect();
    let start = path.iter().position(|&s| s < 1.0).unwrap_or(0);
    let monotone = err[start..].windows(2).all(|w| w[1] <= w[0]);
    let (a, b) = (n / 3, 2 * n / 3);
    let slope = (err[b].ln() - err[a].ln()) / (b - a) as f64;
    let final_rel = err[n - 1] / target;
    CheckOutcome::new(
        "constant bandwidth: Σ_n -> α_h R monotonically, log-error slope ≈ -α_h (20%)",
        monotone && (slope + alpha_h).abs() <= 0.2 * alpha_h && final_rel < 1e-6,
        format!("slope {slope:.5} vs {:.5}, relative error at n={n}: {final_rel:.2e}", -alpha_h),
    )
}

pub fn check_scalar_transition_dichotomy() -> CheckOutcome {
    let r = Matrix::from_element(1, 1, 0.25);
    let q = Matrix::zeros(1, 1);
    let id = Matrix::identity(1, 1);
    let run = |a: f64| -> Vec<f64> {
        let am = Matrix::from_element(1, 1, a);
        let mut b = GaussianBelief::scalar(0.0, 1.0);
        (0..2000)
            .map(|_| {
                let pred = kalman_predict(&b, &am, &q).expect("valid inputs");
                b = kalman_update_gain(&pred, &Vector::zeros(1), &id, &r).expect("valid inputs");
                b.cov[(0, 0)]
            })
            .collect()
    };
    let a: f64 = 1.2;
    let floor = (1.0 - a.powi(-2)) * 0.25;
    let grow = run(a);
    let bounded = grow.iter().all(|&s| s >= floor * (1.0 - 1e-12));
    let decay = run(0.8);
    let vanishes = *decay.last().unwrap() < 1e-100;
    CheckOutcome::new(
        "scalar transition: a > 1 keeps Σ_n >= (1 - a^-2) R, a < 1 drives Σ_n -> 0",
        bounded && vanishes,
        format!(
            "a=1.2 min Σ_n {:.6e} (floor {floor:.6e}); a=0.8 final Σ_n {:.3e}",
            grow.iter().cloned().fold(f64::INFINITY, f64::min),
            decay.last().unwrap()
        ),
    )
}

pub fn check_optimal_rates(alpha_h: f64) -> CheckOutcome {
    let h = optimal_rate_check(&AlphaSequence::Harmonic(alpha_h), 10_000, 1.0, 0.25).expect("valid inputs");
    let z = optimal_rate_check(&AlphaSequence::Zero, 10_000, 1.0, 0.25).expect("valid inputs");
    let e = optimal_rate_check(&AlphaSequence::ExponentialDecay(alpha_h), 10_000, 1.0, 0.25).expect("valid inputs");
    let ok = (h.final_scaled - 2.0).abs() <= 0.1 && (z.final_scaled - 1.0).abs() <= 1e-3 && e.sup_scaled <= 3.0;
    CheckOutcome::new(
        "n Σ_n / R: harmonic -> 2 (5%), zero -> 1, exponential decay bounded by 3",
        ok,
        format!("harmonic {:.4}, zero {:.5}, exponential sup {:.4}", h.final_scaled, z.final_scaled, e.sup_scaled),
    )
}

pub fn check_periodic_band(alpha_h: f64, p: usize) -> CheckOutcome {
    let r = 0.25;
    let seq = AlphaSequence::Periodic { alpha: alpha_h, period: p };
    let n = (60.0 / alpha_h).ceil() as usize * p;
    let path = lemma_covariance_path(n, 1.0, r, &seq).expect("valid inputs");
    let (lo, hi) = periodic_band(alpha_h, p);
    let tail = &path[n - 4 * p..];
    let inside = tail.iter().all(|&s| s >= lo * r * (1.0 - 1e-6) && s <= hi * r * (1.0 + 1e-6));
    let lo_seen = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_seen = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    CheckOutcome::new(
        "periodic resampling: Σ_n oscillates inside [α_h R/(p+(p-1)α_h), α_h R/p]",
        inside,
        format!("p={p}: tail range [{lo_seen:.6e}, {hi_seen:.6e}], band [{:.6e}, {:.6e}]", lo * r, hi * r),
    )
}

pub fn check_beta_crit() -> CheckOutcome {
    let b = beta_crit(0.5).expect("valid threshold");
    let expected = 0.75f64.sqrt() / (1.0 - 0.75f64.sqrt());
    CheckOutcome::new(
        "β_crit(0.5) ≈ 6.4641",
        (b - expected).abs() < 1e-12 && (b - 6.4641).abs() < 1e-4,
        format!("β_crit = {b:.6}"),
    )
}

/// Runs every check with streams derived from `seed`.
pub fn run_oracle_checks(seed: u64) -> Vec<CheckOutcome> {
    let key = StreamKey::new(seed);
    let alpha_h = (4.0f64 / 3000.0).powf(0.4);
    vec![
        check_update_forms(key, 100),
        check_lemma_vs_recursion(key, 20, 1000),
        check_stationary_law(key, 10_000),
        check_monotone_contraction(),
        check_fixed_point_attraction(alpha_h),
        check_scalar_transition_dichotomy(),
        check_optimal_rates(alpha_h),
        check_periodic_band(alpha_h, 2),
        check_beta_crit(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for outcome in run_oracle_checks(1) {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }
}
