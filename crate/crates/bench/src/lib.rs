//! Experiment harness for `lvrep`: fixture specs, configs, batch runs,
//! verification reports and learning-curve data.

pub mod config;
pub mod error;
pub mod fixture;
pub mod plot;
pub mod runner;
pub mod table;
pub mod verify;

pub use config::{ExperimentConfig, Variant};
pub use error::{BenchError, Result};
pub use fixture::FixtureSpec;
