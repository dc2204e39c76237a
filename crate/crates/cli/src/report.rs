use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const REPORT_FILE: &str = "report.json";

/// One declared assertion and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub schema_version: u32,
    pub subcommand: String,
    /// The validated config, defaults filled in.
    pub config: Value,
    pub results: Value,
    pub assertions: Vec<Assertion>,
    /// All assertions passed.
    pub passed: bool,
    /// CSV files written next to the report, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Seconds; the only field that differs between identical runs.
    pub wall_time: f64,
}

impl Report {
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        let path = dir.join(REPORT_FILE);
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(REPORT_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Accumulates assertions in declaration order.
#[derive(Debug, Default)]
pub(crate) struct Checks(Vec<Assertion>);

impl Checks {
    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.0.push(Assertion { name: name.to_string(), passed, detail });
    }

    /// `value <= bound`, reported with both numbers.
    pub fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value <= bound, format!("{value:.3e} (bound {bound:.3e})"));
    }

    pub fn at_least(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value >= bound, format!("{value:.3e} (bound {bound:.3e})"));
    }

    pub fn into_inner(self) -> Vec<Assertion> {
        self.0
    }
}
