use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] railalloc_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("solver not certified: {0}")]
    NotCertified(String),
    #[error("no rows to write")]
    EmptyRows,
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 when a solution
    /// could not be certified, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NotCertified(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
