//! Criterion benchmarks for the paging arithmetic, the engine and the collision models.
//! Run with `cargo bench -p scuba-bench`.
