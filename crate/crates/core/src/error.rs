use thiserror::Error;

/// Which observation a bin belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Source,
    Background,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Region::Source => f.write_str("source"),
            Region::Background => f.write_str("background"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: x has {x}, S has {s}, B has {b} entries")]
    LengthMismatch { x: usize, s: usize, b: usize },

    #[error("dataset must contain at least one bin")]
    EmptyDataset,

    #[error("{which} exposure must be positive, got {value}")]
    NonPositiveExposure { which: Region, value: f64 },

    #[error("invalid {region} count at index {index}: {value:?} is not a non-negative integer")]
    InvalidCount { region: Region, index: usize, value: String },

    #[error("x values must be strictly increasing (index {index})")]
    NonIncreasingGrid { index: usize },

    #[error("infinite deviance in {region} bin {index}: model mean is zero but {count} counts were observed")]
    InfiniteDeviance { region: Region, index: usize, count: u64 },

    #[error("negative model mean {mean} in {region} bin {index}")]
    NegativeMean { region: Region, index: usize, mean: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("optimizer did not converge after {evaluations} evaluations (best point {best:?}, objective {objective})")]
    NonConvergence { best: Vec<f64>, objective: f64, evaluations: usize },

    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cell (theta={theta}, beta={beta}, N={n}): {failed} of {attempted} fits failed")]
    CellFailed { theta: f64, beta: f64, n: usize, failed: usize, attempted: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
