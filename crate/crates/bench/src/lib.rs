//! Monte Carlo benchmark harness for the `hankel-id` estimators.
//!
//! A suite draws random test systems, simulates low-pass excited data at a
//! ladder of noise levels, runs every configured estimator on each data set
//! and scores the 35-tap impulse-response fit. Records are written as CSV
//! with a JSON sidecar holding the configuration; [`report`] turns a record
//! file into mean-fit and mean-time tables plus boxplot statistics.

pub mod config;
pub mod error;
pub mod estimator;
pub mod records;
pub mod report;
pub mod suite;

pub use config::{ExperimentConfig, NoiseKind, OrderRange};
pub use error::{BenchError, Result};
pub use estimator::EstimatorKind;
pub use records::{read_records, write_records, TrialRecord, RECORD_HEADER};
pub use report::{report, write_report, Report};
pub use suite::{run_suite, run_trial, write_suite, Trial, FIT_TAPS};
