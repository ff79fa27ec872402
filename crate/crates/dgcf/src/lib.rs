//! File formats and orchestration around `dgcf-core`: CSV ingest, run
//! configuration, checkpoints and run reports. The `dgcf` binary wires them
//! into subcommands.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;

pub use error::{Error, Result};
