//! Check records and their deterministic serialization.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Command, RunConfig};
use crate::LabError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub id: String,
    pub params: Value,
    pub measured: f64,
    pub budget: f64,
    pub pass: bool,
}

impl Record {
    /// `pass` is `measured <= budget`; a NaN measurement fails.
    pub fn new(id: impl Into<String>, params: Value, measured: f64, budget: f64) -> Self {
        Record { id: id.into(), params, measured, budget, pass: measured <= budget }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub summary: Summary,
    pub records: Vec<Record>,
    /// Per-point data beyond the checks, such as spectrum summaries.
    pub details: Vec<Value>,
    pub config: RunConfig,
}

impl SuiteReport {
    pub fn new(command: Command, config: RunConfig, records: Vec<Record>, details: Vec<Value>) -> Self {
        let passed = records.iter().filter(|r| r.pass).count();
        SuiteReport {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            summary: Summary { total: records.len(), passed, failed: records.len() - passed },
            records,
            details,
            config,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        write_json(&v, 0, &mut out);
        out.push('\n');
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), LabError> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["id", "measured", "budget", "pass"]).map_err(csv_err)?;
        for r in &self.records {
            w.write_record([r.id.clone(), fmt_f64(r.measured), fmt_f64(r.budget), r.pass.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(std::io::Error::other(e))
}

/// Seventeen significant digits; non-finite values become `null`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Pretty JSON with fixed float formatting. Object keys come out sorted.
pub fn write_json(v: &Value, level: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                indent(level + 1, out);
                write_json(x, level + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            indent(level, out);
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                indent(level + 1, out);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_json(x, level + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            indent(level, out);
            out.push('}');
        }
    }
}
