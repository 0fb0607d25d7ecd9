//! Exit-code map: 0 ok, 2 degenerate under `--strict`, 64 usage,
//! 65 numeric failure or failed check, 70 replica failure.

use dilute_clt::error::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_DEGENERATE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_NUMERIC: u8 = 65;
pub const EXIT_REPLICA: u8 = 70;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    pub fn from_error(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Parameter(_) => EXIT_USAGE,
            Error::Replica { .. } => EXIT_REPLICA,
            Error::Data(_)
            | Error::Range(_)
            | Error::Unsupported(_)
            | Error::Numerical(_)
            | Error::NoConvergence { .. }
            | Error::Divergence { .. } => EXIT_NUMERIC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}
