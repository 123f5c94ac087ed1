//! Batch front-end for the PGD Vlasov–Poisson solver.

pub mod config;
pub mod output;
pub mod runner;
pub mod sweep;

pub use config::{keys_help, parse_text, resolve, ConfigError, Entry, RunConfig};
pub use runner::{execute, RunSummary};
pub use sweep::{expand, run_sweep, SweepAxis, SweepRow};
