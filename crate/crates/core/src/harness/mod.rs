//! Experiment configuration, orchestration and reporting.

mod config;
mod experiment;
mod report;

pub use config::{
    validate_config, ConfigError, EvaluationConfig, ExperimentConfig, ExpertConfig, WorldSet, WorldsSpec,
};
pub use experiment::{
    config_hash, prepare_expert, run_experiment, sarsa_seed, success_matrix, world_label, WorldExpert, SANDWICH_SLACK,
    SARSA_ATTEMPTS,
};
pub use report::{EpsilonResult, ExpertSummary, Provenance, Report, REPORT_SCHEMA};
