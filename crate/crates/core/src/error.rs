use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("innovation covariance is singular (condition number {condition:e})")]
    SingularInnovationCovariance { condition: f64 },

    #[error("degenerate policy vector: {0}")]
    DegeneratePolicy(String),

    #[error("action universe exhausted: at most {cap} distinct actions")]
    UniverseExhausted { cap: usize },

    #[error("all particle weights vanished (unnormalized sum {sum:e})")]
    AllWeightsZero { sum: f64 },

    #[error("metric requested on an empty test set")]
    EmptyTestSet,

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SingularInnovationCovariance { .. } => "singular_innovation_covariance",
            Error::DegeneratePolicy(_) => "degenerate_policy",
            Error::UniverseExhausted { .. } => "universe_exhausted",
            Error::AllWeightsZero { .. } => "all_weights_zero",
            Error::EmptyTestSet => "empty_test_set",
            Error::Validation(_) => "validation",
            Error::Io { .. } => "io_failure",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}
