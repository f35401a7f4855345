//! Library side of the `modrec` binary: the run-config format and the
//! subcommand implementations, exposed so integration tests can drive and
//! inspect them directly.

pub mod commands;
pub mod config;
