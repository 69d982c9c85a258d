//! Command-line driver: configuration, subcommands, CSV and SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
pub mod table;

pub use config::RunConfig;
pub use error::{CliError, Result};
