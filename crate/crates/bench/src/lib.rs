//! Criterion benchmarks for lipidgen-core live in `benches/`.
