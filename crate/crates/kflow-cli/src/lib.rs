//! Command-line companion to `kflow-core`: scenario files, bundled presets,
//! artifact writers, and the subcommand runners behind the `kflow` binary.

pub mod catalog;
pub mod config;
pub mod output;
pub mod run;
pub mod scenario;

use std::fmt;

/// Errors surfaced to the terminal. Configuration problems exit with code 2
/// and leave no artifacts; runtime failures exit with code 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_))
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            3
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
