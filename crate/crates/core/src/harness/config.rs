use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cal::ProjectionStrategy;
use crate::gridworld::{paper_worlds, SarsaConfig, WindyGridworld, N_ACTIONS};
use crate::io::BasisSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config field `{field}` out of range: {message}")]
    Range { field: String, message: String },
    #[error("config field `{field}` is invalid: {message}")]
    Invalid { field: String, message: String },
}

fn range(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        field: field.into(),
        message: message.into(),
    }
}

/// `"paper_worlds"` or an explicit list of worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorldsSpec {
    Named(WorldSet),
    List(Vec<WindyGridworld>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldSet {
    PaperWorlds,
}

impl WorldsSpec {
    pub fn resolve(&self) -> Vec<WindyGridworld> {
        match self {
            WorldsSpec::Named(WorldSet::PaperWorlds) => paper_worlds(),
            WorldsSpec::List(worlds) => worlds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    pub sarsa: SarsaConfig,
    pub n_traj: usize,
    pub horizon: usize,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            sarsa: SarsaConfig::default(),
            n_traj: 200,
            horizon: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub n_traj: usize,
    pub max_steps: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            n_traj: 200,
            max_steps: 20,
        }
    }
}

fn default_discount() -> f64 {
    0.9
}

fn default_epsilons() -> Vec<f64> {
    vec![1.0, 0.6, 0.2, 0.0]
}

fn default_output_dir() -> String {
    "crosslearn-out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub worlds: WorldsSpec,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default = "default_epsilons")]
    pub epsilon_values: Vec<f64>,
    #[serde(default)]
    pub cost_basis: BasisSpec,
    #[serde(default)]
    pub expert: ExpertConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Master seed; every stage derives its own sub-seed from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strategy: ProjectionStrategy,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

impl ExperimentConfig {
    /// Defaults around the four benchmark worlds.
    pub fn standard() -> Self {
        validate_config(r#"{"worlds": "paper_worlds"}"#).expect("built-in config is valid")
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let worlds = self.worlds.resolve();
        if worlds.is_empty() {
            return Err(range("worlds", "at least one world is required"));
        }
        for (i, w) in worlds.iter().enumerate() {
            w.validate().map_err(|e| ConfigError::Invalid {
                field: format!("worlds[{i}]"),
                message: e.to_string(),
            })?;
            if (w.rows, w.cols) != (worlds[0].rows, worlds[0].cols) || w.goal != worlds[0].goal {
                return Err(ConfigError::Invalid {
                    field: format!("worlds[{i}]"),
                    message: "all worlds must share grid size and goal".into(),
                });
            }
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(range("discount", format!("{} not in (0, 1)", self.discount)));
        }
        if self.epsilon_values.is_empty() {
            return Err(range("epsilon_values", "empty list"));
        }
        for (i, eps) in self.epsilon_values.iter().enumerate() {
            if !(0.0..=1.0).contains(eps) {
                return Err(range(format!("epsilon_values[{i}]"), format!("{eps} not in [0, 1]")));
            }
        }
        let n_pairs = worlds[0].n_states() * N_ACTIONS;
        self.cost_basis.build(n_pairs).map_err(|e| ConfigError::Invalid {
            field: "cost_basis".into(),
            message: e.to_string(),
        })?;
        let sarsa = &self.expert.sarsa;
        if !(sarsa.learning_rate > 0.0 && sarsa.learning_rate <= 1.0) {
            return Err(range("expert.sarsa.learning_rate", format!("{} not in (0, 1]", sarsa.learning_rate)));
        }
        if !(0.0..=1.0).contains(&sarsa.exploration) {
            return Err(range("expert.sarsa.exploration", format!("{} not in [0, 1]", sarsa.exploration)));
        }
        if !(0.0..=1.0).contains(&sarsa.discount) {
            return Err(range("expert.sarsa.discount", format!("{} not in [0, 1]", sarsa.discount)));
        }
        if !(0.0..=1.0).contains(&sarsa.gate_fraction) {
            return Err(range("expert.sarsa.gate_fraction", format!("{} not in [0, 1]", sarsa.gate_fraction)));
        }
        for (field, v) in [
            ("expert.sarsa.episodes", sarsa.episodes),
            ("expert.sarsa.max_episode_steps", sarsa.max_episode_steps),
            ("expert.n_traj", self.expert.n_traj),
            ("expert.horizon", self.expert.horizon),
            ("evaluation.n_traj", self.evaluation.n_traj),
            ("evaluation.max_steps", self.evaluation.max_steps),
        ] {
            if v == 0 {
                return Err(range(field, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Parses a JSON config document, fills defaults and checks ranges.
pub fn validate_config(document: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = serde_json::from_str(document).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config.check()?;
    Ok(config)
}
