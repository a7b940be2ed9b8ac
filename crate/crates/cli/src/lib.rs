//! Commands behind the `whitham` binary.
//!
//! Exit codes: 0 for any clean verdict (breaking included), 1 for numeric or
//! runtime failures, 2 for usage errors.

pub mod check;
pub mod config;
mod manifest;
pub mod simulate;
pub mod sweep;
pub mod verify;

use std::fmt;

pub use manifest::RunManifest;

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Numeric(anyhow::Error),
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "usage error: {e:#}"),
            Failure::Numeric(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<whitham_core::Error> for Failure {
    fn from(e: whitham_core::Error) -> Self {
        use whitham_core::Error as E;
        match e {
            E::Domain(_) | E::Config(_) | E::Json(_) => Failure::Usage(e.into()),
            _ => Failure::Numeric(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Numeric(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Numeric(e.into())
    }
}

pub type CmdResult<T> = Result<T, Failure>;

/// `eps` must lie strictly inside `(0, 1)`.
pub fn check_eps(eps: f64) -> CmdResult<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("eps must be in (0,1), got {eps}")))
    }
}
