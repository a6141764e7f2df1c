use thiserror::Error;

use crate::grassmann::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("factor index {site} out of range for a layout with {len} factors")]
    SiteOutOfRange { site: usize, len: usize },
    #[error("pole of {what} at u = {at}")]
    Pole { what: &'static str, at: C64 },
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
}
