use thiserror::Error;

/// Errors produced by the numerical core and the experiment front end.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (negative `z`, non-positive `lambda`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A factorization or evaluation produced a non-finite or failed result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The kernel family does not support the requested operation.
    #[error("unsupported for this kernel family: {0}")]
    Unsupported(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Invalid experiment or scenario configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}
