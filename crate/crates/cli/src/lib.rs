//! Command-line pipelines over the featrank toolkit.
//!
//! A run is described by one TOML file (see [`config::RunConfig`]); each
//! subcommand reads it, runs the corresponding analysis and writes JSON, CSV
//! and SVG files into the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod methods;
pub mod svg;

pub use commands::{execute, run, Command, Format, Outputs};
pub use config::RunConfig;
pub use error::CliError;
