use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to map failures to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: schema, parameter or configuration violations.
    Validation,
    /// The inputs are valid but the requested analysis is undefined for them.
    Domain,
    /// A numerical integration produced NaN or infinity.
    NonFinite,
    /// Filesystem or serialization failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("force of infection undefined: total population is zero under dynamic-N mixing")]
    ZeroPopulation,

    #[error("analysis requires the constant-N mixing convention")]
    RequiresConstantN,

    #[error("reproduction number formula invalid: P2*P3 - v*gamma = {0} (must be positive)")]
    InvalidReproductionFormula(f64),

    #[error("transfer matrix V is singular (det = {det})")]
    SingularTransferMatrix { det: f64 },

    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    EigenSolveFailed(usize),

    #[error("endemic equilibrium residual {norm:e} exceeds tolerance {tolerance:e}: {residual:?}")]
    EquilibriumResidual {
        residual: Vec<f64>,
        norm: f64,
        tolerance: f64,
    },

    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },

    #[error(
        "forward-backward sweep diverged in iteration {iteration} ({phase} pass, step {step})"
    )]
    SweepDiverged {
        iteration: usize,
        phase: &'static str,
        step: usize,
    },

    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("trajectory carries no control samples")]
    MissingControls,

    #[error("trajectory too short: {0} samples, need at least 3")]
    TrajectoryTooShort(usize),

    #[error("chart requires at least one series with two or more points")]
    EmptySeries,

    #[error("scenario error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidConfig(_)
            | Error::Schema { .. }
            | Error::LengthMismatch { .. }
            | Error::MissingControls
            | Error::TrajectoryTooShort(_)
            | Error::EmptySeries => ErrorKind::Validation,
            Error::ZeroPopulation
            | Error::RequiresConstantN
            | Error::InvalidReproductionFormula(_)
            | Error::SingularTransferMatrix { .. }
            | Error::EigenSolveFailed(_)
            | Error::EquilibriumResidual { .. } => ErrorKind::Domain,
            Error::NonFinite { .. } | Error::SweepDiverged { .. } => ErrorKind::NonFinite,
            Error::Io { .. } | Error::Csv { .. } | Error::Json(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
