//! Pipeline plumbing behind the `shiftfield` binary: resolved configuration,
//! zero-padding for the refiner's divisibility requirement, the subcommand
//! implementations and the report/table writers.
//!
//! Every subcommand is deterministic given its resolved config (seeds
//! included), writes that config beside its outputs, and produces artifacts
//! that every downstream subcommand can read back.

pub mod commands;
pub mod config;
pub mod error;
pub mod pad;
pub mod pgm;
pub mod table;

pub use config::{Config, Method};
pub use error::{exit_code, CliError};

pub type Result<T> = std::result::Result<T, CliError>;
