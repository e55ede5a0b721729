//! Command-line front end: JSON run configurations, figure presets and the
//! `simulate`, `estimate`, `verify` and `figure` subcommands.

pub mod commands;
pub mod config;
mod error;

pub use config::{ClusterSpec, Preset, RunConfigFile};
pub use error::{CliError, CliResult};
