//! Stage-by-stage pipeline for detecting crowd-pump masterminds.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use config::PipelineConfig;
pub use error::PipelineError;
pub use pipeline::{Detection, Pipeline};
