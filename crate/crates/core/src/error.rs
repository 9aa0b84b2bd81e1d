use thiserror::Error;

/// Errors produced by model construction, fitting, selection, and the
/// bound checker.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no successful restart")]
    NoSuccessfulRestart,

    #[error("missing sigma2_hat in plug-in variance regime")]
    MissingPluginVariance,

    #[error("degenerate plug-in variance: sigma2_hat = {0} is not positive")]
    DegeneratePluginVariance(f64),

    #[error("degenerate zero MSE in log regime")]
    DegenerateZeroMse,

    #[error("theta indistinguishable from theta0")]
    ThetaIndistinguishable,

    #[error("no negative part in sample")]
    NoNegativePart,

    #[error("csv error at row {row}, column {column}: {message}")]
    CsvData {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("csv error: {0}")]
    CsvFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Study(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                return Error::Io(io);
            }
            Error::CsvFormat("unreadable file".into())
        } else {
            Error::CsvFormat(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input rather than a runtime
    /// failure; the CLI maps these to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::CsvData { .. }
                | Error::CsvFormat(_)
                | Error::MissingPluginVariance
        )
    }
}
