//! Benchmarks for the hot paths of the bi-level trainer live in `benches/`.
