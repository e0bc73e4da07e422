use divswap::DivSwapError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] DivSwapError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 1 usage, 2 file or format problem, 3 dimension mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) => match e {
                DivSwapError::Argument(_) => 1,
                DivSwapError::Dimension(_) | DivSwapError::Consistency(_) => 3,
                DivSwapError::Format(_)
                | DivSwapError::Validation(_)
                | DivSwapError::Image(_)
                | DivSwapError::Io(_) => 2,
            },
            CliError::Io(_) | CliError::Csv(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
