//! Experiment orchestration: TOML config, figure presets, seeded parallel
//! Monte-Carlo runs, replica sweeps and versioned CSV emission.

mod config;
mod csv;
mod presets;
mod runner;

pub use config::{
    Estimator, ExperimentSpec, HarnessError, QuantizerCfg, SweepSpec, SweepVariable, SystemSpec,
};
pub use csv::{write_replica_csv, write_simulate_csv, RunMeta, CSV_SCHEMA_VERSION};
pub use presets::preset;
pub use runner::{run_experiment, run_replica_sweep, ReplicaRow, ResultRow};
