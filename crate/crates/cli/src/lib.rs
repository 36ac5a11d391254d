//! Command-line front end for the qdemon simulator: configuration, the
//! `run`, `sweep` and `check` commands, and their output files.

pub mod check;
pub mod config;
pub mod output;
pub mod run;
pub mod sweep;

pub use check::{cmd_check, CheckReport};
pub use config::{ConfigError, RunConfig};
pub use run::{cmd_run, RunSummary};
pub use sweep::{cmd_sweep, SWEEP_HEADER};

/// Written into every output file.
pub const VERSION: &str = concat!("qdemon ", env!("CARGO_PKG_VERSION"));
