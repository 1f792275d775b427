use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Exponent must exceed 1 (got {0})")]
    Exponent(f64),

    /// The hypotheses of the three-solutions theorem could not be certified.
    #[error("certification failed: {reason} (lambda_lo = {lambda_lo}, lambda_hi = {lambda_hi})")]
    Certification {
        reason: String,
        lambda_lo: f64,
        lambda_hi: f64,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
