use thiserror::Error;

/// Failures raised by the numerical pipelines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("integration failure at t = {reached}: {reason}")]
    Integration { reached: f64, reason: String },

    #[error("numerical cover error: partition denominator {denominator:e} at {point:?}")]
    NumericalCover { point: Vec<f64>, denominator: f64 },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("non-transverse crossing at t = {time}: normal velocity {normal_velocity:e}")]
    NonTransverse { time: f64, normal_velocity: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_rank(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::RankMismatch { expected, found });
    }
    Ok(())
}
