//! Exit codes and the error type carried up to `main`.

use std::fmt;

pub const USAGE: u8 = 2;
pub const NUMERICAL: u8 = 3;
pub const IO: u8 = 4;
pub const ACCEPTANCE: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure::new(IO, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<rieszlab::Error> for Failure {
    fn from(e: rieszlab::Error) -> Self {
        use rieszlab::Error::*;
        let code = match e {
            Usage(_) | Domain(_) | Config(_) | Precondition(_) => USAGE,
            Pole | Degenerate(_) | Constraint { .. } | NearSingular { .. } | Numerical(_) => NUMERICAL,
            Io(_) | InsufficientData(_) => IO,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::io(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::io(format!("json error: {e}"))
    }
}
