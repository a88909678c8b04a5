use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid tail configuration: {0}")]
    InvalidConfig(String),

    /// The Hill estimate puts the tail outside the range where an extrapolation is defined.
    #[error("extreme value index {gamma} outside the admissible range for {what}")]
    GammaOutOfRange { gamma: f64, what: &'static str },

    /// The filtered tail sub-sample does not have the size the rank algebra guarantees
    /// for tie-free data.
    #[error("tail sub-sample has {found} points, expected {expected} (tied observations?)")]
    SubsampleSize { found: usize, expected: usize },

    #[error("no upper tail dependence detected: {0}")]
    NoTailDependence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
