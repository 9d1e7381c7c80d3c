//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A forward evaluation ran into the swallowed set.
    #[error("point swallowed at step {step} (t = {time:.6})")]
    Swallowed { step: usize, time: f64 },

    /// A requested time exceeds the span covered by the driver.
    #[error("horizon {requested} exceeds driver span {available}")]
    Horizon { requested: f64, available: f64 },

    /// Quadrature stopped above the requested tolerance.
    #[error("quadrature tolerance not met: requested {requested:e}, achieved {achieved:e}")]
    Quadrature { requested: f64, achieved: f64 },

    /// A least-squares fit has no usable spread in its inputs.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
