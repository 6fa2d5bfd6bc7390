use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Kraus operators are not trace preserving (completeness deviation {deviation:e})")]
    KrausNotTracePreserving { deviation: f64 },

    #[error("sampled a measurement outcome with probability {probability:e}")]
    DegenerateOutcome { probability: f64 },

    #[error("adaptive quadrature did not converge within {budget} intervals")]
    QuadratureNotConverged { budget: usize },

    #[error("no record survived sifting")]
    EmptySiftedKey,

    #[error("efficiency is undefined for zero information gain")]
    DivisionByZeroGain,

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("could not start worker pool: {0}")]
    ThreadPool(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "out of range",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}
