//! Command-line interface and JSON service for `waring-core`.

pub mod cli;
pub mod format;
pub mod report;
pub mod service;
