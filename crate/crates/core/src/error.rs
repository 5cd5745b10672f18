use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("concentration {0:e} kg/m^3 is outside the sensor detection scope")]
    OutOfScope(f64),

    #[error("sensor model domain error: {0}")]
    ModelDomain(String),

    /// The bracketed base of the voltage-to-concentration inversion is not positive.
    #[error(
        "voltage {gamma} V is inconsistent with the sensitivity curve (inversion base {base:e})"
    )]
    InversionDomain { gamma: f64, base: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("Levenberg-Marquardt did not converge after {iterations} iterations (rmse {rmse:e})")]
    NotConverged {
        iterations: usize,
        params: Vec<f64>,
        rmse: f64,
    },

    #[error("residual function returned a non-finite value")]
    NonFiniteResidual,

    #[error("wind estimation failed: no valid node pair in any direction")]
    WindEstimation,

    #[error("location estimation failed: {0}")]
    Estimation(String),

    #[error("filter design failed: {0}")]
    FilterDesign(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
