//! Command-line front end for `localband`: flat key/value configuration,
//! CSV and JSON artifacts, and the `fit`, `band`, `simulate` and `ustat`
//! subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod forest_json;
pub mod table;

pub use config::RunConfig;
pub use error::{CliError, ErrorKind};
