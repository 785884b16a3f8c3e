//! Benchmark harness for sparse-representation classifiers: dataset
//! loading, seeded splits, PCA, λ selection and CSV reports, plus the
//! `sparsebench` command line.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod protocol;
pub mod report;

pub use config::BenchConfig;
pub use error::BenchError;
pub use protocol::{run_benchmark, sweep_lambda, BenchOutcome};
