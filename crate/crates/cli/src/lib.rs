//! Experiment runner for the CZ pulse optimizer: configuration, seeding,
//! sweeps and persistence of CSV/JSON outputs with run manifests.

pub mod commands;
pub mod config;
pub mod output;
pub mod runner;

pub use commands::{execute, Command};
pub use config::{cell_seed, Method, Overrides, RunConfig, Vary};
pub use output::RunManifest;
