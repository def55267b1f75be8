//! Command-line driver for `hamlearn-core`: TOML configs in physical units,
//! per-step CSV tables, JSON run logs and JSONL traces.

pub mod app;
pub mod config;
pub mod error;
pub mod output;
pub mod units;

pub use config::{Overrides, RunConfig};
pub use error::CliError;
pub use units::{Direction, Quantity, UnitMap};
