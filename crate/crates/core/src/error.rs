use thiserror::Error;

/// Errors raised by the identification pipeline.
#[derive(Debug, Error)]
pub enum SysIdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The regressor matrix is rank deficient at the solver tolerance.
    #[error("ill-posed regression: regressor rank {rank} < {columns} columns")]
    IllPosedRegression { rank: usize, columns: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SysIdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SysIdError::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        SysIdError::NumericalFailure(msg.into())
    }

    /// Process exit code used by the CLI: 2 for numerical trouble, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SysIdError::NumericalFailure(_) | SysIdError::IllPosedRegression { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SysIdError>;
