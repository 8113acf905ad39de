//! Front end for the streaming control simulator: configuration handling and
//! the subcommands behind the `streamctl` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{load_config, parse_config, RunConfig};
pub use error::{CliError, Result};
