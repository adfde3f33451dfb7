//! Audio and report persistence, dataset generation and the CLI surface for
//! the tracksep workspace.

pub mod config;
pub mod dataset;
pub mod registry;
pub mod report;
pub mod runner;
pub mod wav;
