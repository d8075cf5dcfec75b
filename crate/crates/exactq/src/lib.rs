//! Configuration, experiment driver and output formats for the `exactq` CLI.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{ScenarioConfig, Target};
pub use error::{AppError, AppResult};
pub use experiment::{run_experiment, Experiment, RunOptions, Summary};
