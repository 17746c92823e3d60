//! Reports, metric files, verification suites and the command-line front end
//! over `weylscope-core`.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod metric_file;
pub mod report;
pub mod suites;

pub use error::{Failure, Result};
