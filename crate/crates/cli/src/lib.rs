//! Command-line front end: configuration files, closed-loop comparison runs,
//! certificate checks, and gain sweeps.

pub mod cli;
pub mod commands;
pub mod config;

pub use commands::{check_bounds, run_command, sweep, BoundsOutcome, ControllerRun, RunOutcome, SweepGrid, SweepRow};
pub use config::{load_config, parse_config, ConfigError, Overrides, RunConfig};
