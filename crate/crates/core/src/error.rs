use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DivSwapError {
    #[error("format error: {0}")]
    Format(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, DivSwapError>;
