use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside the admissible domain of an operation.
    #[error("{0}")]
    Domain(String),

    #[error("{moment} diverges at alpha = {alpha} (requires alpha > {bound})")]
    DivergentMoment {
        moment: &'static str,
        alpha: f64,
        bound: f64,
    },

    #[error("no admissible root of the quartic in ({lo}, {hi})")]
    NoAdmissibleRoot { lo: f64, hi: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::NoAdmissibleRoot { .. } | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
