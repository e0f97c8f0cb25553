//! Configs, reports and the `sgnet` command line on top of `sgnet-core`.

pub mod cli;
pub mod config;
pub mod report;

pub use cli::run;
