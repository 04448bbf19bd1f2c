use hyperplane_moments::error::{OracleError, SimulationError};
use hyperplane_moments::validation::ValidationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{failed} of {total} checks failed")]
    ValidationFailed { failed: usize, total: usize },
    #[error("simulation did not converge: {0}")]
    NonConvergence(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Simulation(SimulationError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::ValidationFailed { .. } => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Io { .. } | CliError::Oracle(_) | CliError::Simulation(_) => 1,
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::RetryCapExceeded { .. } => CliError::NonConvergence(e.to_string()),
            SimulationError::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Simulation(other),
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        match e {
            ValidationError::Oracle(o) => o.into(),
            ValidationError::Simulation(s) => s.into(),
        }
    }
}
