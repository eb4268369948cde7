//! Batch front end for the eventclock experiments.
//!
//! Each run reads one flat JSON config, calls the library and writes a single
//! CSV or JSON table. Output is written to a temporary file in the target
//! directory and renamed into place, so a failed run leaves nothing behind.

pub mod config;
pub mod experiments;
pub mod format;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{Experiment, Format, RunConfig};
pub use format::{fmt_g12, parse_csv, Cell, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(eventclock_core::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl From<eventclock_core::Error> for CliError {
    fn from(e: eventclock_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Runs a loaded config and returns the rendered table.
pub fn render(cfg: &RunConfig) -> Result<String, CliError> {
    let table = experiments::run(cfg)?;
    Ok(table.render(cfg.experiment.name(), cfg.format))
}

/// Loads, runs and writes; returns the output path.
pub fn execute(
    experiment: Experiment,
    config_path: &Path,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<PathBuf, CliError> {
    let cfg = RunConfig::load(experiment, config_path, out, format)?;
    let text = render(&cfg)?;
    write_atomic(&cfg.output_path, text.as_bytes())?;
    Ok(cfg.output_path)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
