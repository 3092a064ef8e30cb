//! Batch experiments: config parsing, parameter sweeps, CSV output.

pub mod experiment;
pub mod plan;

pub use experiment::{render_csv, run_experiment, RunOptions, RunResult, CSV_HEADER};
pub use plan::{parse_config, parse_config_file, ExperimentPlan, RunSpec};
