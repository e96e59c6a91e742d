//! Std companion to `mixdens-core`: CSV and JSON formats, experiment
//! configuration, the parallel replication and cross-validation driver, and
//! the `mixdens` command line tool.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod driver;
pub mod model;
pub mod report;

pub use mixdens_core::*;
