//! Experiment driver for the rail bandwidth allocator: configuration files,
//! parameter sweeps, CSV output and scenario files.

pub mod clock;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod scenario_io;

pub use clock::StdClock;
pub use config::{ConfigError, ExperimentConfig};
pub use error::{Error, Result};
pub use experiment::{
    run_bandwidth_sweep, run_beta_sweep, run_certification, run_solver_comparison, SweepRow,
};
pub use output::{emit_csv, read_sweep_csv};
