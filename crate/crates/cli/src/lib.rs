//! Seeded experiment runner for union-of-subspaces recovery.
//!
//! An [`ExperimentConfig`] fully determines a result [`Table`]: every
//! random draw derives from the top-level seed, and rows come out in trial
//! order whatever the execution mode.

pub mod config;
pub mod error;
pub mod experiments;
pub mod table;

pub use config::{Command, ExperimentConfig};
pub use error::CliError;
pub use experiments::{run_experiment, Report};
pub use table::Table;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
