//! Benchmark harness: datasets, Gram pipelines, decision grids and report files.

pub mod datasets;
pub mod emit;
pub mod pipeline;
pub mod run;

pub use datasets::{best_linear_accuracy, generate_dataset, Dataset, DatasetKind};
pub use emit::{emit_report, Format};
pub use pipeline::{boundary_grid, compute_gram, compute_gram_with, BoundaryGrid, GramOptions, GramRun, Measurement, PairOrder};
pub use run::{run_benchmark, run_benchmark_with, BenchReport, BenchSummary, BenchmarkConfig, NoiseSettings};
