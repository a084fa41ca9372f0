//! Command-line orchestration for the shotscore pipeline.

pub mod args;
pub mod commands;
pub mod config;

pub use args::{Cli, Command};
pub use config::{Profile, RunConfig};

use shotscore::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_IO: u8 = 5;

pub const THREADS_ENV: &str = "SHOTSCORE_THREADS";

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => EXIT_CONFIG,
        Error::Shape(_) | Error::Validation(_) | Error::Dataset(_) | Error::Checkpoint(_) | Error::State(_) => {
            EXIT_VALIDATION
        }
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::Format { .. } | Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
    }
}

/// Sizes the global worker pool from `SHOTSCORE_THREADS` when set.
pub fn init_threads() -> shotscore::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config(THREADS_ENV, format!("`{raw}` is not a positive integer")))?;
    // A pool that is already initialized keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> shotscore::Result<()> {
    init_threads()?;
    commands::dispatch(cli)
}
