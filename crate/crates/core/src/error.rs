use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A compound-symmetry specification is not usable (e.g. non-positive variance).
    #[error("invalid CS specification: {0}")]
    InvalidSpec(String),

    /// Generator parameters of a group covariance violate their invariants.
    #[error("invalid GCS parameters: {0}")]
    InvalidParams(String),

    /// Two kernel expressions cannot be combined, or a kernel breaks the identifiability rule.
    #[error("kernel composition error: {0}")]
    Composition(String),

    /// A numerical routine failed (Cholesky breakdown after nugget escalation, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Every restart of a likelihood fit failed.
    #[error("fit failed: {0}")]
    Fit(String),

    /// A metric is undefined for the given input (e.g. Q² on a constant response).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Malformed input file, with location information in the message.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
