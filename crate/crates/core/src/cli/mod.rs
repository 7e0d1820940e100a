//! Configuration, orchestration and artifacts for the `onco` binary.

pub mod commands;
pub mod config;
pub mod gradcheck;
pub mod metrics;
pub mod output;

pub use commands::{check_gradient, compare, optimize_schedule, simulate};
pub use config::{load_config, ControlSpec, RunConfig, OUT_DIR_ENV};
pub use metrics::{drug_peak_time, ComparisonMetrics};
