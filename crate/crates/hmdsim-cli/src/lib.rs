//! Library surface of the `hmdsim` command-line tool, split out so the
//! subcommands are testable without spawning processes.

pub mod commands;
pub mod config;
pub mod report;
