//! Command implementations and the HTTP service behind the `defi-rank`
//! binary.

pub mod api;
pub mod commands;
pub mod error;

pub use error::CliError;
