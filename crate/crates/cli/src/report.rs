//! Checks, tables and the files they are written to.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

/// Version tag written in the first line of every CSV.
pub const CSV_SCHEMA: &str = "colombeau-csv v1";
pub const MANIFEST_SCHEMA: &str = "colombeau-manifest v1";

/// One pass/fail item with the measured margin (positive when passing).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

impl Check {
    pub fn new(id: impl Into<String>, name: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            passed: margin >= 0.0,
            margin,
            detail: detail.into(),
        }
    }

    /// Combines sub-checks: passes when all pass, with the smallest margin.
    pub fn all(id: impl Into<String>, name: impl Into<String>, parts: &[Check]) -> Self {
        let margin = parts.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        let detail = parts
            .iter()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Self {
            id: id.into(),
            name: name.into(),
            passed: parts.iter().all(|c| c.passed),
            margin,
            detail,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {} (margin {:.3e}): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.margin,
            self.detail
        )
    }
}

/// Rows destined for one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write(&self, dir: &Path, experiment: &str) -> Result<()> {
        let path = dir.join(self.file_name());
        let mut file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "# {CSV_SCHEMA} table={} experiment={experiment}", self.name)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Checks and tables produced by one experiment.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Quantities computed from the config, recorded in the manifest.
    pub derived: Vec<(String, f64)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn extend(&mut self, other: Outcome) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
        self.derived.extend(other.derived);
    }
}

/// Shortest round-trip formatting, so identical runs give identical files.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:e}")
    }
}

pub fn write_summary(dir: &Path, experiment: &str, outcome: &Outcome) -> Result<()> {
    let mut text = format!("experiment: {experiment}\n");
    for c in &outcome.checks {
        text.push_str(&c.to_string());
        text.push('\n');
    }
    let failed = outcome.checks.iter().filter(|c| !c.passed).count();
    text.push_str(&format!("{} checks, {} failed\n", outcome.checks.len(), failed));
    fs::write(dir.join("summary.txt"), text).context("writing summary.txt")
}
