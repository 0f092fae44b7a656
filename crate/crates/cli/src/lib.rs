//! Batch harness: config-driven pipelines that persist JSON reports, CSV
//! tables and UFIELD dumps, plus replay for determinism checks.

pub mod artifacts;
pub mod config;
pub mod pipelines;
pub mod replay;

pub use artifacts::Envelope;
pub use config::{ExperimentConfig, Pipeline};
pub use pipelines::{run, RunError};
pub use replay::{replay, Drift, ReplayError, ReplayOutcome};
