use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Anything wrong with the configuration, caught before frames run.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl SimError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 1,
            SimError::Runtime(_) => 2,
        }
    }
}

impl From<sumis_core::Error> for SimError {
    fn from(e: sumis_core::Error) -> Self {
        SimError::Runtime(e.to_string())
    }
}

impl From<sumis_coding::Error> for SimError {
    fn from(e: sumis_coding::Error) -> Self {
        SimError::Runtime(e.to_string())
    }
}

pub type SimResult<T> = std::result::Result<T, SimError>;
