use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped by the stage that raises them; [`Error::class`] maps
/// each one onto the coarse categories the command-line tool turns into exit
/// codes.
#[derive(Debug, Error)]
pub enum Error {
    // ingestion
    #[error("{path}: ticker {ticker} has no rows")]
    MissingAsset { path: PathBuf, ticker: String },
    #[error("{path}:{line}: non-positive close {value} for {ticker}")]
    BadPrice {
        path: PathBuf,
        line: u64,
        ticker: String,
        value: f64,
    },
    #[error("{path}:{line}: negative bullish count {value} for {ticker}")]
    BadCount {
        path: PathBuf,
        line: u64,
        ticker: String,
        value: i64,
    },
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
    #[error("panels share no common dates")]
    NoOverlap,
    #[error("series of length {len} is shorter than the window width {width}")]
    TooShort { len: usize, width: usize },
    #[error("invalid window spec: {0}")]
    InvalidWindow(String),

    // correlation and graphs
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("correlation undefined: every value tied in at least one series")]
    DegenerateCorrelation,
    #[error("edge budget {budget} exceeds the {pairs} available vertex pairs")]
    BudgetTooLarge { budget: usize, pairs: usize },
    #[error("graph has no edges")]
    DegenerateGraph,

    // modelling
    #[error("not enough history: {0}")]
    InsufficientHistory(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("all training labels are identical")]
    DegenerateLabels,
    #[error("fits were not estimated on the same training set")]
    IncomparableFits,

    // evaluation
    #[error("AUC undefined: need both classes (positives {positives}, negatives {negatives})")]
    UndefinedAuc { positives: usize, negatives: usize },
    #[error("benchmark AUC {0} is not above 0.5")]
    BenchmarkDegenerate(f64),

    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Coarse error category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidWindow(_) => ErrorClass::Usage,
            Error::Numeric(_)
            | Error::DegenerateLabels
            | Error::IncomparableFits
            | Error::BenchmarkDegenerate(_) => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
