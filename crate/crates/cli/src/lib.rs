//! Experiment runner behind the `conecoord` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod trace_io;

pub use config::{load, ExperimentConfig, ExperimentPlan};
pub use error::{CliError, CliResult};
pub use experiment::run_experiment;
pub use trace_io::{read_trace, write_trace};
