//! File-based pipeline behind the command-line tool: each command reads the
//! artifacts of its upstream commands from an output directory and records
//! what it wrote in a manifest.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod store;

pub use artifacts::{Manifest, Workspace};
pub use commands::{run_all, run_command, Command};
pub use config::RunConfig;
