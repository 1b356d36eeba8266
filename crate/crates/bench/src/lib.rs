//! Criterion benchmarks for the coverage engines live in `benches/`.
