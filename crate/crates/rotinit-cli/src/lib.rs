//! Benchmark harness behind the `rotinit` binary.
//!
//! Split from `main.rs` so the sweep/metrics/report machinery is unit
//! testable. The binary itself is a thin clap wrapper.

pub mod config;
pub mod metrics;
pub mod report;
pub mod sweep;
