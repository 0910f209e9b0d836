//! Command-line front end: configuration, CSV ingestion, graph export and
//! the subcommand implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod ingest;

pub use error::{CliError, CliResult, EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK};

/// Environment variable holding the default worker budget.
pub const THREADS_ENV: &str = "VARFDR_THREADS";
