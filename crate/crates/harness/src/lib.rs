//! Experiment driver for the surveillance optimizers: seeded Monte Carlo
//! sweeps, CSV output and the sampled self-checks.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod record;

pub use config::{default_params, DesignType, ExperimentConfig, ExperimentId, GridPoint};
pub use experiment::{run_experiment, run_trial, trial_seed};
pub use record::{write_outputs, ResultRecord};
