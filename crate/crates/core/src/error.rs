use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// All-zero synchronization metric; the harness counts the trial as a
    /// sync error instead of silently picking index 0.
    #[error("degenerate all-zero synchronization metric")]
    DegenerateMetric,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("EVM calibration failed: {0}")]
    CalibrationFailure(String),

    /// rho = 1 leaves no data component to detect.
    #[error("no data component in frame (rho = 1)")]
    NoData,

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("config error: field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
