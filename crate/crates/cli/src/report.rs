//! Report documents and CSV emission.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;
use crate::schema::{Check, Mode};

/// Which side of the threshold counts as a pass.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Below,
    Above,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: Check,
    pub passed: bool,
    pub residual: f64,
    pub threshold: f64,
    pub expect: Expect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn below(name: Check, residual: f64, threshold: f64) -> Self {
        Self { name, passed: residual <= threshold, residual, threshold, expect: Expect::Below, note: None }
    }

    pub fn above(name: Check, residual: f64, threshold: f64) -> Self {
        Self { name, passed: residual > threshold, residual, threshold, expect: Expect::Above, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Real(f64),
}

#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ReportDocument {
    pub schema: u32,
    pub mode: Mode,
    pub tol: f64,
    pub seed: u64,
    /// All requested checks passed (true when none were requested).
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub data: Value,
    pub traces: BTreeMap<String, Table>,
    /// Flow snapshots, written separately as JSON lines.
    #[serde(skip)]
    pub checkpoints: Vec<Value>,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        // 17 significant digits
        Cell::Real(x) => format!("{x:.16e}"),
    }
}

/// Writes trace `selector` as CSV with a header row.
pub fn emit_csv<W: Write>(report: &ReportDocument, selector: &str, out: W) -> Result<(), CliError> {
    let table = report.traces.get(selector).ok_or_else(|| CliError::MissingSelector(selector.to_owned()))?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(format_cell)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per line.
pub fn write_checkpoints<W: Write>(report: &ReportDocument, mut out: W) -> Result<(), CliError> {
    for c in &report.checkpoints {
        serde_json::to_writer(&mut out, c).map_err(|e| CliError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
