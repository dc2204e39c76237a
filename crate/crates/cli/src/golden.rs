//! Bundled acceptance configs with their expected exit codes. The configs
//! are compiled in, so the manifest works from any directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::report::Report;
use crate::{exit, exit_code_for, run};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct GoldenEntry {
    pub name: String,
    pub config: String,
    pub expected_exit: u8,
    pub description: String,
}

const MANIFEST: &str = include_str!("../configs/manifest.json");

macro_rules! bundled {
    ($($file:literal),* $(,)?) => {
        &[$(($file, include_str!(concat!("../configs/", $file)))),*]
    };
}

const CONFIGS: &[(&str, &str)] = bundled!(
    "linear_flow.json",
    "loop_normalization.json",
    "closing_chart.json",
    "partition_calibrator.json",
    "counterexample.json",
    "oscillator.json",
    "oscillator_converged.json",
    "cluster_linear.json",
    "golden_solenoid.json",
    "iet_solenoid.json",
    "odometer_solenoid.json",
    "t3_trapping.json",
    "exhaustion.json",
    "stable_norm_flat.json",
    "stable_norm_conformal.json",
    "homotopy.json",
    "ode_underflow.json",
    "negative_tol.json",
    "unknown_field.json",
);

/// The manifest, in file order.
pub fn list_golden() -> Vec<GoldenEntry> {
    serde_json::from_str(MANIFEST).expect("bundled manifest is valid")
}

pub fn config_text(file: &str) -> Option<&'static str> {
    CONFIGS.iter().find(|(f, _)| *f == file).map(|(_, text)| *text)
}

/// Outcome of one manifest entry.
#[derive(Debug)]
pub struct GoldenRun {
    pub entry: GoldenEntry,
    pub exit: u8,
    pub report: Option<Report>,
    pub error: Option<String>,
}

impl GoldenRun {
    pub fn as_expected(&self) -> bool {
        self.exit == self.entry.expected_exit
    }
}

/// Runs an entry with its output in `out/<name>`.
pub fn run_golden(entry: &GoldenEntry, out: &Path) -> GoldenRun {
    let result = config_text(&entry.config)
        .ok_or_else(|| anyhow::anyhow!("config {} is not bundled", entry.config))
        .and_then(|text| Ok(ExperimentConfig::from_json(text)?))
        .and_then(|cfg| run(&cfg, &out.join(&entry.name)));
    match result {
        Ok(report) => GoldenRun {
            entry: entry.clone(),
            exit: if report.passed { exit::PASS } else { exit::ASSERTION },
            report: Some(report),
            error: None,
        },
        Err(e) => GoldenRun { entry: entry.clone(), exit: exit_code_for(&e), report: None, error: Some(format!("{e:#}")) },
    }
}
