//! Error category to exit code mapping: 2 for configuration/validation
//! problems, 3 for I/O and malformed files, 4 for numerical failures.

use sftm_core::analysis::AnalysisError;
use sftm_core::dataset::DatasetError;
use sftm_core::nn::NnError;
use sftm_core::sim::SimError;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, invalid parameters, shape mismatches. Exit 2.
    Config(String),
    /// Filesystem problems, malformed or truncated artifacts. Exit 3.
    Io(String),
    /// Non-finite losses, divergence. Exit 4.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Format(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(_) | DatasetError::Format(_) | DatasetError::VersionMismatch { .. } => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Diverged { .. } => CliError::Numeric(e.to_string()),
            NnError::Io(_) | NnError::Format(_) => CliError::Io(e.to_string()),
            NnError::InvalidConfig(_) | NnError::Shape(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
