use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rpf_core::experiments::synthetic_weather;
use rpf_core::models::{
    simulate_observations, LnasConstants, LnasModel, LnasParams, LnasPrior, LogisticMapModel, StationaryLinearModel,
};
use rpf_core::smc::{
    multinomial_resample, run_filter, systematic_resample, BandwidthSchedule, FilterConfig, ResamplingPolicy,
};
use rpf_core::{Purpose, StreamKey};

fn resampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("resample");
    for n in [1_000usize, 100_000] {
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + (i % 17) as f64).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("systematic", n), &weights, |b, w| {
            let mut rng = StreamKey::new(1).stream(Purpose::Resample, 0, 0);
            b.iter(|| systematic_resample(black_box(w), &mut rng))
        });
        group.bench_with_input(BenchmarkId::new("multinomial", n), &weights, |b, w| {
            let mut rng = StreamKey::new(1).stream(Purpose::Resample, 0, 0);
            b.iter(|| multinomial_resample(black_box(w), &mut rng))
        });
    }
    group.finish();
}

fn stationary_filter(c: &mut Criterion) {
    let model = StationaryLinearModel::scalar(1.0, 1.0, 0.25).unwrap();
    let obs = simulate_observations(&model, &[0.0], 100, StreamKey::new(2), false).unwrap().observations;
    let mut group = c.benchmark_group("stationary-100-steps");
    group.sample_size(20);
    for n in [1_000usize, 10_000] {
        for (name, policy) in [("always", ResamplingPolicy::Always), ("ess-0.5", ResamplingPolicy::EssThreshold(0.5))] {
            let config = FilterConfig::new(n, policy, BandwidthSchedule::RuleOfThumb);
            group.bench_with_input(BenchmarkId::new(name, n), &config, |b, config| {
                b.iter(|| run_filter(&model, black_box(&obs), config, 3).unwrap())
            });
        }
    }
    group.finish();
}

fn nonlinear_filters(c: &mut Criterion) {
    let mut group = c.benchmark_group("nonlinear");
    group.sample_size(10);
    let logistic = LogisticMapModel::new(3.0, 0.3, 0.5, 0.1).unwrap();
    let obs = simulate_observations(&logistic, &logistic.initial_state(3.33), 200, StreamKey::new(3), false)
        .unwrap()
        .observations;
    let config = FilterConfig::new(1000, ResamplingPolicy::EssThreshold(0.5), BandwidthSchedule::RuleOfThumb);
    group.bench_function("logistic-200-steps-n1000", |b| {
        b.iter(|| run_filter(&logistic, black_box(&obs), &config, 5).unwrap())
    });

    let lnas = LnasModel::new(LnasConstants::default(), LnasPrior::default(), synthetic_weather(100, 1), 0.1).unwrap();
    let truth = lnas.initial_state(LnasParams { rue: 3.56, gamma: 0.625, mu_a: 550.0 });
    let obs = simulate_observations(&lnas, &truth, 100, StreamKey::new(4), false).unwrap().observations;
    group
        .bench_function("lnas-100-steps-n1000", |b| b.iter(|| run_filter(&lnas, black_box(&obs), &config, 5).unwrap()));
    group.finish();
}

criterion_group!(benches, resampling, stationary_filter, nonlinear_filters);
criterion_main!(benches);
