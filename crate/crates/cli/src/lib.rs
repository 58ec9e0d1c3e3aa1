//! Experiment harness behind the `calibkit` binary.

pub mod bias_sweep;
pub mod config;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod popcheck;
pub mod results;
pub mod tradeoff;

pub use config::Config;
pub use error::{CliError, Result};
