//! Configuration, sweeps, exponent fits and report files for the lab.

pub mod config;
pub mod fit;
pub mod run;
pub mod svg;

pub use config::{point_seed, ConfigError, ExperimentConfig, Expect, Kind, Sampling};
pub use fit::{fit_log_exponent, fit_power, LogFit, Model};
pub use run::{run_experiment, ReportRow, RunOptions, RunSummary, Status};
