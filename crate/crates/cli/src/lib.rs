//! `lsir` command-line tool: synthetic data, regression fits, direction
//! inference, batch benchmarks and bit-exact replays of earlier runs.

pub mod args;
pub mod benchmark;
pub mod commands;
pub mod format;
pub mod record;

use std::io::Write;

pub use args::Cli;
pub use commands::run;

/// Exit status for usage and configuration problems.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for failures inside an estimator.
pub const EXIT_ENGINE: u8 = 3;
/// Exit status when a replay does not reproduce the recorded outputs.
pub const EXIT_MISMATCH: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] lsir_core::Error),
    #[error("replay differs from the record: {0}")]
    Mismatch(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use lsir_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Json(_) | CliError::Output(_) => EXIT_CONFIG,
            CliError::Mismatch(_) => EXIT_MISMATCH,
            CliError::Core(e) => match e {
                E::InvalidConfig(_)
                | E::UnknownFamily(_)
                | E::MissingColumn(_)
                | E::ParseError { .. }
                | E::Csv { .. }
                | E::Io(_)
                | E::NonFiniteInput { .. }
                | E::LengthMismatch(..) => EXIT_CONFIG,
                _ => EXIT_ENGINE,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn write_json<W: Write, T: serde::Serialize>(out: &mut W, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}
