use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("state {state} carries no occupation mass, its policy row is undefined")]
    ZeroStateMass { state: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("numerical failure in {context} after {iterations} iterations (residual {residual:e})")]
    Numerical {
        context: String,
        iterations: u64,
        residual: f64,
    },

    #[error("linear program is infeasible: {0}")]
    Infeasible(String),

    #[error("linear program is unbounded: {0}")]
    Unbounded(String),

    #[error("instance too large for brute force: {pairs} state-action pairs with grid {grid}")]
    InstanceTooLarge { pairs: usize, grid: usize },

    #[error(
        "expert quality gate failed: goal reached from {reached}/{total} start states, need {required}"
    )]
    QualityGate {
        reached: usize,
        total: usize,
        required: usize,
        episode_returns: Vec<f64>,
    },

    #[error(transparent)]
    Config(#[from] crate::harness::ConfigError),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    pub(crate) fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
