//! Command-line front end: configuration loading, solution files,
//! CSV export, and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod emit;
pub mod persist;
