//! File formats, configuration, parallel runners and the command line for
//! `lmest-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use error::CliError;
