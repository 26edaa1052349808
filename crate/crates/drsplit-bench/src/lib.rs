//! Phase retrieval benchmark harness: parameter-grid sweeps over the
//! splitting method and its two baselines, accuracy tables, and
//! performance-profile data with fully deterministic outputs.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{BenchConfig, Method, MuRule};
pub use report::{
    accuracy_table, performance_profile, profile_csv, profile_thresholds, runs_csv, tables_csv,
    timings_csv, RunRecord, TABLE_THRESHOLDS,
};
pub use runner::{run_benchmark, run_benchmark_with_instances, BenchError, BenchOutcome};
