//! Criterion benchmarks for the streaming control crates live in `benches/`.
