//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point or object lies outside the region where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative method failed to converge or produced non-finite values.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A trajectory touched a boundary tangentially.
    #[error("grazing/tangency: {0}")]
    Tangency(String),

    /// A disc failed its simplicity certification.
    #[error("certification failed: {0}")]
    Certification(String),

    /// Argument pair lies on the diagonal of the boundary product.
    #[error("diagonal pair: boundary points coincide at s = {0}")]
    Diagonal(f64),

    /// A search ran out of budget without finding what it looked for.
    #[error("not found: {0}")]
    NotFound(String),

    /// Discs or regions that must be disjoint overlap.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Flow escaped without hitting the requested section.
    #[error("escape: no section hit within time {0}")]
    Escape(f64),

    /// Level set is not certified as contact type.
    #[error("contact check failed: {0}")]
    Contact(String),

    /// Grid resolution too coarse for the requested map.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
