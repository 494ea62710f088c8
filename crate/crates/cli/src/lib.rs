//! Command-line front end: flag and config-file handling, command dispatch
//! and report serialization.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Report};
pub use config::{parse_config, Cli, Command, RunConfig};
pub use error::CliError;
