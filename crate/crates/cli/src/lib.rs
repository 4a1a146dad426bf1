//! Library surface of the `etlinks` binary, exposed so integration tests
//! can drive the pipeline in-process.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

pub use config::{AnchorMode, Overrides, PipelineConfig};
pub use error::CliError;
pub use stages::run_stage;
