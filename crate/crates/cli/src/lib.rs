//! Scenario runner around the simulator core: config ingestion, protocol
//! execution, parameter sweeps, and report emission.

pub mod config;
pub mod report;
pub mod run;
pub mod sweep;
