//! Criterion benchmarks for the cellpatch pipeline live under `benches/`.
