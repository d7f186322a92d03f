use rand::Rng;

use crate::models::StreamRng;

fn cumulative(weights: &[f64]) -> (Vec<f64>, usize) {
    let mut acc = 0.0;
    let cum = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Rounding can leave the total slightly below 1; never select a zero-weight tail.
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1);
    (cum, last)
}

/// Systematic resampling: one uniform `u`, positions `(u + k)/N`.
///
/// Particle `i` is selected `⌊N wᵢ⌋` or `⌈N wᵢ⌉` times.
pub fn systematic_resample(weights: &[f64], rng: &mut StreamRng) -> Vec<usize> {
    let n = weights.len();
    let (cum, last) = cumulative(weights);
    let u: f64 = rng.random();
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let pos = (u + k as f64) / n as f64;
        while j < last && cum[j] <= pos {
            j += 1;
        }
        out.push(j);
    }
    out
}

/// Multinomial resampling: `N` independent categorical draws.
pub fn multinomial_resample(weights: &[f64], rng: &mut StreamRng) -> Vec<usize> {
    let (cum, last) = cumulative(weights);
    (0..weights.len())
        .map(|_| {
            let u: f64 = rng.random();
            cum.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}
