//! Library face of the `mml` binary. Config parsing and the subcommand
//! bodies live here so integration tests can drive them directly and
//! compare against the shipped executable.

pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, Result};
