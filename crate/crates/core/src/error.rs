use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid linear program: {0}")]
    InvalidProgram(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("alternative index {index} out of range for {len} alternatives")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("uncertainty set is infeasible")]
    Infeasible,

    #[error("uncertainty set is unbounded")]
    Unbounded,

    #[error("query history is already full (K = {0})")]
    HistoryFull(usize),

    #[error("need at least {required} alternatives, found {found}")]
    TooFewAlternatives { required: usize, found: usize },

    #[error("every candidate query leaves an infeasible uncertainty set")]
    NoFeasibleQuery,

    #[error("lookup table mismatch: {0}")]
    TableMismatch(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than numerics.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::NumericalFailure(_))
    }
}
