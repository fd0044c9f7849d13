//! Error taxonomy shared by the library and the CLI.
//!
//! The CLI maps these onto its exit-code contract: input errors exit 2,
//! resource-cap errors exit 2, structural errors exit 3. Property
//! violations (a check that ran fine but found the property false) are not
//! errors; they are reported in result objects and exit 1 at the CLI level.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The caller passed something outside an operation's domain.
    #[error("input error: {0}")]
    Input(String),

    /// A size cap was exceeded without an override.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// An internal invariant of the construction failed; carries enough
    /// context to locate the failing step.
    #[error("structural error: {0}")]
    Structural(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }
}
