//! File formats and pipeline commands on top of `dpgp-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod report;
