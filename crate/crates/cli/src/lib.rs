//! Library side of the `bingnn` command: everything the subcommands do,
//! callable without going through argument parsing.

pub mod alloc;
pub mod bench;
pub mod config;
mod error;
pub mod ingest;
pub mod perf;
pub mod tune;
pub mod verify;

pub use error::{CliError, Result};
