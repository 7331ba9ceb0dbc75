//! File formats, statistical verification and the command-line front end for
//! [`genea_core`].
//!
//! - [`io`]: tree and point-process JSON, contour and point CSV.
//! - [`stats`]: Kolmogorov-Smirnov and chi-square machinery.
//! - [`verify`]: law checks and the large-population convergence experiments.
//! - [`streams`]: reproducible per-replicate random streams.
//! - [`cli`]: argument parsing and dispatch for the `genea` binary.

pub mod cli;
pub mod io;
pub mod stats;
pub mod streams;
pub mod verify;

pub use genea_core as core;

/// Errors of the std layer. All of them map to a usage/parameter exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] genea_core::Error),
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
