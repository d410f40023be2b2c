//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid wavelet filter `{name}`: {reason}")]
    InvalidFilter { name: String, reason: String },

    #[error("table resolution {level} is below the minimum of {min}")]
    ResolutionTooLow { level: u32, min: u32 },

    #[error("cascade refinement did not reach a fixed point (residual {residual:e})")]
    CascadeNotConverged { residual: f64 },

    #[error("{what} = {value} lies outside {domain}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coefficient set stops at level {found} but the rule requires cutoff {expected}")]
    CutoffMismatch { expected: u32, found: u32 },

    #[error("invalid design density: {0}")]
    InvalidDensity(String),

    #[error("{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_config_errors(errors: &[ConfigError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}
