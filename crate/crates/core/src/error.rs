use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid percentile distribution at index {index}: {reason}")]
    InvalidPercentiles { index: usize, reason: String },

    #[error("degenerate quantile window [{lo}, {hi}]")]
    DegenerateWindow { lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cannot summarize an empty sample set")]
    EmptySamples,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid record {record}: {reason}")]
    InvalidRecord { record: String, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown link {0}")]
    UnknownLink(String),

    #[error("unknown route {0}")]
    UnknownRoute(String),

    #[error("grid of {cells} cells exceeds the budget of {budget}")]
    GridTooLarge { cells: usize, budget: usize },

    #[error("vehicle stalled at x = {position_m:.1} m, t = {time_s:.0} s")]
    Stalled { position_m: f64, time_s: f64 },

    #[error("no data: {0}")]
    NoData(String),

    #[error("insufficient history for {target}: found {found:?}")]
    InsufficientHistory { target: NaiveDate, found: Vec<NaiveDate> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
