//! Command-line front end for the `ptree-learn` experiment runner.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

pub use commands::{execute, Cli, CliError};
pub use config::{ConfigArgs, ExperimentKind, RunConfig};
