use std::fmt;

use convention_lab::engine::{SimError, StepError};
use convention_lab::policies::PolicyError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Transport(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Transport(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Transport(m) => write!(f, "endpoint error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match &e {
            SimError::Config(_) => CliError::Config(e.to_string()),
            SimError::Step(StepError::Policy { source, .. }) => match source {
                PolicyError::Transport(_) | PolicyError::Provider(_) => CliError::Transport(e.to_string()),
                PolicyError::Render(_) => CliError::Config(e.to_string()),
                PolicyError::Parse { .. } => CliError::Runtime(e.to_string()),
            },
            SimError::Step(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<convention_lab::engine::ConfigError> for CliError {
    fn from(e: convention_lab::engine::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}
