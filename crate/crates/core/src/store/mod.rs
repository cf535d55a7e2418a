//! Gesture template database, calibration, and session logs, persisted as
//! JSON files.

mod calibration;
mod log;
mod templates;

use std::io;
use std::path::Path;

pub use calibration::{CalibrationSet, MIN_CALIBRATION_WINDOWS};
pub use log::{load_log, save_log, session_log_path, SessionLog};
pub use templates::{load_db, save_db, GestureTemplate, TemplateDatabase, SCHEMA_VERSION, SIGMA_FLOOR};

use crate::emg::{EmgError, GestureLabel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("cannot calibrate label {0}")]
    BadLabel(GestureLabel),
    #[error("not enough calibration windows for {label}: {have} < {need}")]
    InsufficientCalibration { label: GestureLabel, have: usize, need: usize },
    #[error("unsupported schema version {0}")]
    UnsupportedSchema(u64),
    #[error("corrupt template database: {0}")]
    CorruptDatabase(String),
    #[error("database not ready for a session: {0}")]
    NotSessionReady(String),
    #[error("corrupt session log: {0}")]
    CorruptLog(String),
    #[error("log event at {got} us precedes {last} us")]
    NonMonotonicLog { last: u64, got: u64 },
    #[error("session log already completed")]
    LogClosed,
    #[error(transparent)]
    Emg(#[from] EmgError),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

/// Writes via a sibling temp file and rename so readers never see a
/// half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
