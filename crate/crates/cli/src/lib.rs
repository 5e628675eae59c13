//! Command-line front end: configuration, figure pipelines and file output.

pub mod commands;
pub mod config;
pub mod exit;
pub mod output;
pub mod reproduce;

pub use commands::{run, Cli, Command};
pub use exit::CliError;
