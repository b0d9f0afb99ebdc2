use thiserror::Error;

/// Errors raised across the library.
///
/// The variants map one-to-one onto the CLI exit codes: usage problems are
/// handled by the argument parser, `Domain`/`Precondition`/`Infeasible`/
/// `Dimension`/`NotConverged` exit with 3, `Resource` exits with 4.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::Infeasible(_) => "infeasible",
            Error::Resource(_) => "resource",
            Error::Dimension(_) => "dimension",
            Error::NotConverged(_) => "not_converged",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(format!($($arg)*)) };
}
pub(crate) use domain;
