//! Test functions, configuration documents and the benchmark harness.

pub mod benchmark;
pub mod config;
pub mod functions;
pub mod presets;

pub use benchmark::{quantile, run_benchmark, slug, write_report, BenchmarkReport, CellFailure, VariantReport};
pub use config::{
    BenchmarkConfig, CategoricalFormSpec, CategoricalSpec, Config, ContinuousSpec, DesignKind, DesignSpec,
    Family, FamilySpec, KernelSpec, VariantSpec, WarpingKind, WithinForms,
};
pub use functions::{eval_test_function, TestFunction};
pub use presets::{example1_config, example1_variants, example2_config, example2_variants};
