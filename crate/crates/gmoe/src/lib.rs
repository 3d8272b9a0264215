//! Files, configuration and command-line plumbing around `gmoe-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod fsutil;
pub mod infer;
pub mod plot;
pub mod report;
