//! File formats, the `cbsp` command implementations and the bundled test
//! networks around `cbsp-core`.

pub mod commands;
pub mod config;
pub mod fixtures;
pub mod inp;
pub mod records;
pub mod report;
