//! Driver for the `hpm` binary: configuration, commands and report formats.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::RunConfig;
pub use error::CliError;
