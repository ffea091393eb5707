//! Data ingestion, task streams, metrics and experiment orchestration.

pub mod config;
pub mod data;
pub mod experiment;
pub mod metrics;
pub mod oracle;
pub mod stability;
pub mod tasks;
