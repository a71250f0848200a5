//! Criterion benchmarks for the influence diagnostics live under `benches/`.
