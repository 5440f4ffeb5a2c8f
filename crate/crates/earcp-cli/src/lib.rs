//! Experiment harness for the `earcp` library: TOML experiment configs, a
//! long-format CSV codec for expert streams, and a deterministic runner that
//! races aggregators over synthetic or ingested streams and writes trace and
//! summary CSVs.
//!
//! The `earcp` binary exposes the same functionality on the command line
//! through the `run`, `simulate`, `sweep`, and `replay` verbs.

pub mod config;
pub mod csv_io;
pub mod runner;
