//! Configuration, commands and output formats of the `knnbandit` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_concentration, cmd_run, cmd_sweep, ConcentrationArgs};
pub use config::{ConfigFile, Overrides};
pub use error::CliError;
