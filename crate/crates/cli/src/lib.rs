//! The experiment harness behind the `tscombine` binary: corpus ingestion,
//! run orchestration over the (base pool × ensemble+HP grid × corpus),
//! results persistence, report generation, and the meta-learning pipeline.
//!
//! Everything the binary does is reachable through this library, so
//! integration tests drive the same code paths as the command line.

pub mod config;
pub mod error;
pub mod ingest;
pub mod meta;
pub mod reports;
pub mod run;
pub mod store;

pub use config::{RunConfig, SplitConfig};
pub use error::{HarnessError, Result, SchemaError};
pub use run::{run_experiment, RunOutcome};
