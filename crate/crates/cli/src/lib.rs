//! Library surface of the `warntriage` command-line pipeline: configuration,
//! the five commands, and their exit-code mapping. Kept as a library so
//! integration tests can drive commands in-process.

pub mod commands;
pub mod config;
pub mod error;
pub mod source;

pub use commands::{cmd_eval, cmd_label, cmd_mine, cmd_rank, cmd_train};
pub use config::PipelineConfig;
pub use error::CliError;
