use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// One bound-versus-measurement check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    /// The tested relation with every value substituted.
    pub formula: String,
    /// `<=`, `>=` or `==` (the latter within `tolerance`).
    pub relation: String,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    /// `measured <= bound + tolerance`.
    pub fn at_most(name: &str, formula: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Verdict {
        Verdict::build(name, formula, "<=", measured, bound, tolerance, measured <= bound + tolerance)
    }

    /// `measured >= bound - tolerance`.
    pub fn at_least(name: &str, formula: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Verdict {
        Verdict::build(name, formula, ">=", measured, bound, tolerance, measured >= bound - tolerance)
    }

    /// `|measured - bound| <= tolerance`.
    pub fn close(name: &str, formula: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Verdict {
        Verdict::build(name, formula, "==", measured, bound, tolerance, (measured - bound).abs() <= tolerance)
    }

    fn build(name: &str, formula: impl Into<String>, rel: &str, measured: f64, bound: f64, tolerance: f64, pass: bool) -> Verdict {
        Verdict {
            name: name.to_string(),
            formula: formula.into(),
            relation: rel.to_string(),
            measured,
            bound,
            tolerance,
            pass: pass && measured.is_finite(),
        }
    }

    /// Recomputes `pass` from the recorded numbers.
    pub fn recheck(&self) -> bool {
        let ok = match self.relation.as_str() {
            "<=" => self.measured <= self.bound + self.tolerance,
            ">=" => self.measured >= self.bound - self.tolerance,
            _ => (self.measured - self.bound).abs() <= self.tolerance,
        };
        ok && self.measured.is_finite()
    }
}

/// Per-command table with a fixed column order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// Places where the run departs from the textbook procedure.
    pub notes: Vec<String>,
    pub summary: BTreeMap<String, Value>,
    pub table: Table,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64, config: BTreeMap<String, String>) -> ExperimentReport {
        ExperimentReport {
            experiment: experiment.to_string(),
            seed,
            config,
            notes: Vec::new(),
            summary: BTreeMap::new(),
            table: Table::default(),
            verdicts: Vec::new(),
            pass: true,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.pass &= v.pass;
        self.verdicts.push(v);
    }

    pub fn verdict_named(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// The JSON report with the wall-clock field zeroed, for comparisons.
    pub fn without_timing(&self) -> ExperimentReport {
        ExperimentReport {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values serialize")
    }

    pub fn write_json(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.json", self.experiment));
        fs::write(&path, self.to_json() + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.experiment));
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(&self.table.columns).map_err(io)?;
        for row in &self.table.rows {
            w.write_record(row.iter().map(cell)).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
