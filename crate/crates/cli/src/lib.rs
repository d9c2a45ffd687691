//! File formats, configuration and subcommands behind the `qtomo` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
