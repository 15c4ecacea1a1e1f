use std::process::ExitCode;

use attacklab::attack::AttackError;
use attacklab::estimator::EstimatorError;
use attacklab::projections::ProjectionError;
use attacklab::theory::TheoryError;
use attacklab::victims::VictimError;
use thiserror::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    CheckFailed = 1,
    Config = 2,
    Transport = 3,
    Precondition = 4,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> ExitCode {
        ExitCode::from(s as u8)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl CliError {
    pub fn status(&self) -> Status {
        match self {
            CliError::Config(_) => Status::Config,
            CliError::Transport(_) => Status::Transport,
            CliError::Precondition(_) => Status::Precondition,
        }
    }

    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }
}

impl From<VictimError> for CliError {
    fn from(e: VictimError) -> CliError {
        match e {
            VictimError::Transport(_) | VictimError::Handshake(_) | VictimError::Protocol(_) => {
                CliError::Transport(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> CliError {
        match e {
            EstimatorError::Oracle { source, .. } => source.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> CliError {
        match e {
            AttackError::Precondition(_) | AttackError::TrivialInstance(_) => CliError::Precondition(e.to_string()),
            AttackError::Oracle(v) => v.into(),
            AttackError::Estimator(est) => est.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> CliError {
        match e {
            TheoryError::Victim(v) => v.into(),
            TheoryError::Estimator(est) => est.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}
