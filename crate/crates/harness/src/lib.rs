//! Command-line runner for `ctrlopt`: configuration, trace files, the
//! benchmark sweep, and self-checks.

pub mod check;
pub mod config;
pub mod export;
pub mod runner;
pub mod sweep;
