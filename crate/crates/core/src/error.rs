use thiserror::Error;

/// Errors raised by the library. The CLI maps `Config`/`Usage`/`Overlay`
/// to exit code 1 and the numerical variants to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed at t = {t:.6e}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        last_state: Vec<f64>,
    },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("overlay: {0}")]
    Overlay(String),

    #[error("config: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. } | Error::Quadrature { .. } | Error::Domain(_) | Error::Fit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
