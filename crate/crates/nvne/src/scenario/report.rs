use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ScenarioKind;
use crate::dynamics::{InvariantReport, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Below,
    Above,
}

/// One asserted quantity with the threshold it was held to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            comparison: Comparison::Below,
            passed: value < threshold,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            comparison: Comparison::Above,
            passed: value > threshold,
        }
    }

    /// Forces a failure regardless of the comparison, e.g. when the value is
    /// not meaningful.
    pub fn fail_unless(mut self, ok: bool) -> Self {
        self.passed &= ok;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub kind: ScenarioKind,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub headline: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariants: Option<InvariantReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    /// A passing report with no checks, for validation-only commands.
    pub fn empty(cfg: &super::config::ScenarioConfig) -> Self {
        Self {
            scenario_id: cfg.id.clone(),
            kind: cfg.kind,
            passed: true,
            checks: Vec::new(),
            headline: BTreeMap::new(),
            invariants: None,
            notes: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Columns for a per-scenario plot file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: RunReport,
    pub trajectory: Option<Trajectory>,
    pub plot: Option<PlotData>,
}
