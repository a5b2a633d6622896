//! File formats, pipeline orchestration and the `searchrec` command line on
//! top of `searchrec-core`.

pub mod cli;
pub mod config;
pub mod debug;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
