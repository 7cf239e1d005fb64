//! Batch front end: train, evaluate, marginalize, convert and verify.

pub mod assign;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod model_io;
pub mod verify;

pub use commands::run;
pub use error::{CliError, CliResult, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};
