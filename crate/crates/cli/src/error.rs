use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] isomonodromy::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("selector {0:?} is not in the report")]
    MissingSelector(String),
}

impl CliError {
    /// 2 for malformed input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}
