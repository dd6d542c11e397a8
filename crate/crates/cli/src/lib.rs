//! Command-line front end of `repairflow-core`: TOML run configurations,
//! subcommands writing CSV tables plus a JSON summary, and parallel
//! parameter sweeps.
//!
//! Every run writes `<out_dir>/<run_id>/`, with `summary.json` last. Output
//! is byte-identical for identical configuration and tool version.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod state_io;
pub mod sweep;

pub use commands::{execute, run, Command, Outcome};
pub use config::{load_config, LoadedConfig, RunConfig};
pub use error::{CliError, ConfigError};
