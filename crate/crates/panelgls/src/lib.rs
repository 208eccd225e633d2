//! File formats, configuration and the command-line driver for
//! `panelgls-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use error::{CliError, CliResult};
