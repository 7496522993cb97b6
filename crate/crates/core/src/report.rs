//! Tabulated experiment output.
//!
//! Every experiment produces a [`ValueReport`]: a list of
//! `(section, label, param, value, bound, pass)` rows plus `#`-prefixed
//! metadata lines. Numbers are written with Rust's shortest round-trip
//! formatting so that identical runs produce identical bytes.

use std::io::Write;

use crate::error::Result;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub section: String,
    pub label: String,
    pub param: Option<f64>,
    pub value: f64,
    pub bound: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValueReport {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<Row>,
}

impl ValueReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    /// Adds an informational row (always passing, no bound).
    pub fn info(&mut self, section: &str, label: &str, param: Option<f64>, value: f64) {
        self.push(section, label, param, value, None, true);
    }

    pub fn push(
        &mut self,
        section: &str,
        label: &str,
        param: Option<f64>,
        value: f64,
        bound: Option<f64>,
        pass: bool,
    ) {
        self.rows.push(Row {
            section: section.to_string(),
            label: label.to_string(),
            param,
            value,
            bound,
            pass,
        });
    }

    /// Adds a checked row: passes when `value <= bound`.
    pub fn check_le(&mut self, section: &str, label: &str, param: Option<f64>, value: f64, bound: f64) {
        self.push(section, label, param, value, Some(bound), value <= bound);
    }

    /// Adds a checked row: passes when `value >= bound`.
    pub fn check_ge(&mut self, section: &str, label: &str, param: Option<f64>, value: f64, bound: f64) {
        self.push(section, label, param, value, Some(bound), value >= bound);
    }

    pub fn extend(&mut self, other: ValueReport) {
        self.rows.extend(other.rows);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn rows_in<'a>(&'a self, section: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.section == section)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["section", "label", "param", "value", "bound", "pass"])?;
        for r in &self.rows {
            w.write_record([
                r.section.clone(),
                r.label.clone(),
                r.param.map(fmt_num).unwrap_or_default(),
                fmt_num(r.value),
                r.bound.map(fmt_num).unwrap_or_default(),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Shortest round-trip decimal representation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}
