//! Command-line front end: configuration, dispatch and CSV output.

pub mod commands;
pub mod config;

pub use commands::{run, CliError};
pub use config::{ConfigError, RunConfig};
