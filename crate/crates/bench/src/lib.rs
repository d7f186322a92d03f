//! Criterion benchmarks for the particle filter live in `benches/`.
