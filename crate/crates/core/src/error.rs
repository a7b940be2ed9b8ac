use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// Blow-up of the simulated solution is not an error: it is reported through
/// run outcomes and verdicts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric overflow: {context}")]
    NumericOverflow { context: String },

    #[error("derivative of order {order} is ill-conditioned on this grid (noise amplification {amplification:.3e})")]
    IllConditioned { order: usize, amplification: f64 },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("kernel calibration failed: relative residual {residual:.3e} exceeds {limit:.1e}")]
    CalibrationFailed { residual: f64, limit: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
