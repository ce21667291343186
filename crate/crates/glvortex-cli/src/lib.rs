//! Command-line experiments over the glvortex library.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{execute, Outcome};
pub use config::{CommandConfig, RunConfig};
pub use error::{CliError, CliResult};
