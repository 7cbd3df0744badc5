//! Benchmark harness: configuration, sweep execution, complexity profiling,
//! and result reporting for the wirebench CLI.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod profile;
pub mod report;
pub mod sweep;

pub use config::Config;
pub use error::{HarnessError, Result};
