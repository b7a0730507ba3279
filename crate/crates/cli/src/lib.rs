//! Scenario files, run and sweep drivers, and the acceptance suite behind the
//! `stifflwr` binary.

pub mod acceptance;
pub mod config;
pub mod runner;

pub use config::{parse_config, Config, ConfigError, RunManifest, SolverKind, SweepAxes};
pub use runner::{compare, run, sweep, versioned_dir, CompareReport, Outcome, RunError, SweepReport};
