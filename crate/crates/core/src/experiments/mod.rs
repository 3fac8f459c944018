//! Experiment harness: configuration files, batteries, statistics,
//! modulation study and reports.

pub mod bench;
pub mod config;
pub mod modulation;
pub mod plot;
pub mod stats;
pub mod suite;
pub mod svg;
pub mod train;

pub use config::{ConfigError, KvConfig};
