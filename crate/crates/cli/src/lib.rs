//! Command-line orchestration: configuration, the assemble / simulate / sweep
//! / verify / report phases, and the run manifest.

pub mod config;
pub mod manifest;
pub mod run;

pub use config::RunConfig;
pub use run::{Phase, RunOptions, Summary};

/// Failure classes, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] fracplane_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

/// Exit code of a finished command: 0 when every enabled check passed, 1 otherwise.
pub fn exit_code(result: &Result<Summary, CliError>) -> i32 {
    match result {
        Ok(s) if s.all_pass => 0,
        Ok(_) => 1,
        Err(e) => e.exit_code(),
    }
}
