//! Config-driven experiment runner for `cyclelab`.
//!
//! Each run reads one JSON config, dispatches to the library pipelines,
//! and writes `report.json` plus CSV point clouds into the output directory.

pub mod config;
pub mod golden;
pub mod report;
pub mod run;

use std::fmt;

pub use config::ExperimentConfig;
pub use report::Report;
pub use run::run;

/// Exit codes of the `cyclelab` binary.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const ASSERTION: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NUMERICAL: u8 = 3;
}

/// A config that failed to parse or validate, with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config at {}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Maps a failed run to its exit code. Library errors that describe bad
/// input count as config errors; the rest are numerical failures.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    use cyclelab::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return exit::CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::RankMismatch { .. } | E::Domain(_) | E::Construction(_) => exit::CONFIG,
                E::Integration { .. }
                | E::NumericalCover { .. }
                | E::Consistency(_)
                | E::NonTransverse { .. }
                | E::Resolution(_) => exit::NUMERICAL,
            };
        }
    }
    // unreadable files, unwritable output directories
    exit::CONFIG
}
