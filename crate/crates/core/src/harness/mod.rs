//! Monte-Carlo experiments: configuration, execution across algorithm
//! variants, RMSE statistics and CSV export.

pub mod config;
pub mod experiment;
pub mod export;
pub mod stats;

pub use config::{Algorithm, ExperimentConfig, FilterConfig, Manifest};
pub use experiment::{run_experiment, run_filter, run_rng, sp_crlb_curve, Experiment, RunResult, StepRecord};
pub use stats::{mean_over_window, rmse_cdf, rmse_over_time, TimeWindow};
