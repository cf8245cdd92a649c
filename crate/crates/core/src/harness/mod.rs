//! File-configured experiments: parsing and validation of JSON configs,
//! running them, and writing reports plus a run manifest.

mod config;
mod run;

pub use config::{parse_config, validate_config, Experiment, ExperimentConfig, OutputSpec};
pub use run::{
    run, BoundsReport, ConvergenceReport, ConvergenceRow, OracleReport, OracleRow, RunManifest, RunStatus,
    StageTiming, VERSION,
};
