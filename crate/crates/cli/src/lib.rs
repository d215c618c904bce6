//! Experiment harness for weighted consensus ADMM: problem generation,
//! uncertainty weights, solver runs, dense references and batch tables.
//!
//! Every command reads one flat config (see [`config`]) and writes plain
//! text files (MatrixMarket, CSV, PGM) that carry the config and seed.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod problem;

pub use cli::{run, Cli, Command};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
