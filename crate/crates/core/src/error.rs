use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("regime violation: {0}")]
    RegimeViolation(String),

    #[error("eigensolver failed to converge at k = {k:.6e} rad/m")]
    NumericalFailure { k: f64 },

    #[error("chirality undefined: total decay rate {total:.3e} below threshold (gap regime)")]
    DegenerateChirality { total: f64 },

    #[error("mode window too narrow: margin {margin:.3e} rad/s below required {required:.3e} rad/s")]
    WindowTooNarrow { margin: f64, required: f64 },

    #[error("integrator step failure at t = {t:.6e} s: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("photon wrap-around: travel {travel:.3e} m exceeds free path {limit:.3e} m")]
    WrapAround { travel: f64, limit: f64 },

    #[error("density matrix lost positivity at t = {t:.6e} s (min eigenvalue {min_eig:.3e})")]
    PositivityLoss { t: f64, min_eig: f64 },

    #[error("lattice energy grew from {from:.3e} to {to:.3e} with sources off")]
    Instability { from: f64, to: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}
