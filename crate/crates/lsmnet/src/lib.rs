//! Batch front-end for `lsmnet-core`: TOML run configurations, policy
//! persistence, CSV reports and the published benchmark cases.

pub mod benchmark;
pub mod config;
pub mod persist;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_str, ConfigError, RunConfig};
pub use run::{run, run_with_log, Stage};
