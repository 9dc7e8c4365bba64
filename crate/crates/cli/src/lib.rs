//! Library surface of the `spectator` command-line tool: config ingestion,
//! deterministic CSV emission, and the subcommand implementations.
//!
//! Everything the binary does is callable from here so integration tests can
//! exercise the exact production code paths.

pub mod config;
pub mod output;
pub mod run;
