//! Configuration, built-in scenarios, file formats and experiment drivers.

pub mod config;
pub mod experiments;
pub mod io;
pub mod scenarios;

pub use config::{parse_config, parse_config_str, InitSpec, Mode, Scenario};
pub use experiments::{
    build_model, convergence_experiment, run_scenario, simulate_agents, stability_scan,
    ConvergenceReport, RunSummary, StabilityReport,
};
pub use io::{
    read_field_snapshot, read_field_snapshot_on, read_snapshot, write_field_snapshot, SnapshotMeta,
};
pub use scenarios::builtin;
