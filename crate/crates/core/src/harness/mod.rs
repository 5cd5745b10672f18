//! Configuration, file formats and the seeded experiment runner behind the
//! command-line tool.

pub mod config;
pub mod io;
pub mod runner;

pub use config::{ExperimentConfig, GridConfig, PlumeConfig};
pub use runner::{
    run_experiment, run_sweep, simulate_all, simulate_measurement, write_report, Measurement,
    Outcome, Quartiles, RunReport, SweepRange, SweepRow, Truth,
};
