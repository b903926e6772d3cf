//! One error currency for the whole binary.
//!
//! Every failure prints a single `error: E_<CODE>: <message>` line on
//! stderr. Exit codes: 0 success, 2 bad or missing data, 3 bad usage,
//! 4 internal fault.

use std::fmt;
use std::path::Path;

use viral_core::attributes::AttributeError;
use viral_core::datasets::DatasetError;
use viral_core::eval::EvalError;
use viral_core::ingest::IngestError;
use viral_core::learn::LearnError;
use viral_core::model::ModelError;
use viral_core::scoring::ScoringError;

pub const EXIT_DATA: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    code: String,
    message: String,
    exit: i32,
}

impl CliError {
    pub fn data(code: &str, message: impl Into<String>) -> CliError {
        CliError {
            code: code.to_string(),
            message: message.into(),
            exit: EXIT_DATA,
        }
    }

    pub fn usage(message: impl Into<String>) -> CliError {
        CliError {
            code: "E_BAD_USAGE".to_string(),
            message: message.into(),
            exit: EXIT_USAGE,
        }
    }

    pub fn no_input(path: &Path) -> CliError {
        CliError::data("E_NO_INPUT", format!("input file {} does not exist", path.display()))
    }

    pub fn locked(path: &Path) -> CliError {
        CliError::data(
            "E_OUTPUT_LOCKED",
            format!(
                "output directory is locked by {}; remove it if no other run is active",
                path.display()
            ),
        )
    }

    pub fn io(err: std::io::Error) -> CliError {
        CliError::data("E_IO_FAILURE", err.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        self.exit
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

macro_rules! from_library_error {
    ($($ty:ty),+) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> CliError {
                CliError::data(&format!("E_{}", e.code()), e.to_string())
            }
        }
    )+};
}

from_library_error!(
    IngestError,
    ModelError,
    ScoringError,
    DatasetError,
    AttributeError,
    LearnError,
    EvalError
);
