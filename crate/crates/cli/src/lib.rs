//! Configuration parsing and subcommands behind the `eavesim` binary.

pub mod commands;
pub mod config;

pub use config::{parse_config, ConfigError, RunConfig};
