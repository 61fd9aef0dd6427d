//! Experiment runner: seeded trials of distributed, pooled and
//! no-communication BH, reduced to FDR/power rows and written as CSV.

pub mod cli;
pub mod config;
pub mod csv;
pub mod runner;

pub use cli::cli_main;
pub use config::{Covariance, ExperimentConfig, GridParam, LocalLevel, R1Rule};
pub use csv::{emit_csv, render_csv, CSV_HEADER};
pub use runner::{run_experiment, run_grid_point, run_trial, AlphaSummary, Method, MethodResult, TrialOutcome};
