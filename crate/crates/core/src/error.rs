use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The GEV mean is infinite for xi >= 1.
    #[error("GEV mean does not exist for xi = {0} (requires xi < 1)")]
    MeanUndefined(f64),

    /// No gridpoint lies strictly inside the neighborhood radius.
    #[error("no gridpoint within {radius_km} km of center {center}")]
    EmptyNeighborhood { center: String, radius_km: f64 },

    /// Inconsistent or missing input data.
    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training data error: {0}")]
    Training(String),

    #[error("objective is not finite at the starting coefficients")]
    NonFiniteStart,

    #[error("skill score undefined: reference score is {0}")]
    UndefinedSkill(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
