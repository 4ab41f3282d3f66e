//! Library surface of the pipeline driver, used by the binary and by the
//! acceptance suite.

pub mod config;
pub mod manifest;
pub mod report;
pub mod stages;
