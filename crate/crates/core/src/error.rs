use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole: zeta(s, a) is singular at s = 1")]
    Pole,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("gap sum {sum} violates the constraint sum = {n}")]
    Constraint { sum: f64, n: usize },
    #[error("near-singular operator: eigenvalue {value:e} at mode {mode}")]
    NearSingular { mode: usize, value: f64 },
    #[error("numerical integrity: {0}")]
    Numerical(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition refused: {0}")]
    Precondition(String),
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
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
