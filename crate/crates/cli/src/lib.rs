//! File formats, configuration and commands for the `maxent-debias` tool.
//!
//! The numerical work lives in `maxent-debias-core`; this crate reads and
//! writes schemas, datasets, models and reports, and wires the steps into
//! the `encode`, `train`, `sample`, `evaluate` and `pipeline` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::PipelineConfig;
pub use error::{CliError, ExitKind, Result};
