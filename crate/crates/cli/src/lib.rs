//! Experiment driver: topology generation, training, evaluation and table
//! emission for sparse Boltzmann machines, configured by TOML files.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{exit, CliError};
