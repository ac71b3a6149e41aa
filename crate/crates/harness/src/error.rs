use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad config file, unknown experiment or a parameter outside its range.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] covapprox_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl HarnessError {
    pub fn config(field: &str, reason: impl std::fmt::Display) -> Self {
        HarnessError::Config(format!("`{field}`: {reason}"))
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(covapprox_core::Error::InvalidParameter { .. }) => 2,
            _ => 1,
        }
    }
}
