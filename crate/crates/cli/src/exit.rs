//! Error type carrying the process exit code.

use std::fmt;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PHYSICS: i32 = 3;
pub const EXIT_FIT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn fit(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_FIT,
            message: message.into(),
        }
    }

    /// Physics failures exit with 3, fit failures with 4, the rest with 2.
    pub fn from_core(e: cpt_core::Error) -> Self {
        let code = if e.is_physics() {
            EXIT_PHYSICS
        } else if matches!(e, cpt_core::Error::Fit(_)) {
            EXIT_FIT
        } else {
            EXIT_INPUT
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }

    pub fn io(what: &std::path::Path, e: impl fmt::Display) -> Self {
        CliError::input(format!("{}: {e}", what.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<cpt_core::Error> for CliError {
    fn from(e: cpt_core::Error) -> Self {
        CliError::from_core(e)
    }
}
