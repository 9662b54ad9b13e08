//! Plumbing behind the `rfpca` binary: run configuration, on-disk formats,
//! event-record ingestion, run reports, and the command implementations.
//!
//! Everything lives in this library target so integration tests drive the
//! exact serialization and command code the binary runs. The commands are
//! pure functions of their input files, configuration, and seed: reruns
//! produce byte-identical CSVs (reports differ only in timings).

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod ingest;
pub mod report;

pub use commands::{cmd_breakdown, cmd_fpca, cmd_ingest, cmd_median, cmd_simulate, Overrides};
pub use error::{exit_code, CliError, CliResult};
