//! Criterion benchmarks for lsgd-core live in `benches/`.
