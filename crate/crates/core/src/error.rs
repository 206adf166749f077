use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Error, Debug)]
pub enum Error {
    /// An input violates a documented precondition (ranges, grid mismatches, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure failed (factorization pivot, quadrature, ...).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// The time-stepper or Picard iterator failed to converge.
    #[error("solver error: {0}")]
    Solver(String),
    /// The experiment configuration is structurally invalid.
    #[error("config error: {0}")]
    Config(String),
    /// One of the standing model hypotheses (H.1-H.6 catalog) is violated.
    #[error("hypothesis {name} violated: {detail}")]
    Hypothesis { name: String, detail: String },
    /// Not enough usable data for an estimation procedure.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn hypothesis(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            name: name.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
