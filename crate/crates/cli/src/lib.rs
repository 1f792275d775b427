//! Batch front end for the `plap-core` certifier and solvers.

pub mod config;
pub mod report;
pub mod run;
