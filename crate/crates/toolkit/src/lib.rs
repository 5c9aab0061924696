//! Batch toolkit around `netshock-core`: CSV ingestion and emission, TOML
//! run configuration, run manifests, the pipeline commands and the
//! acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod manifest;

pub use commands::{run_command, Command};
pub use config::RunConfig;
pub use error::{Error, Result};
