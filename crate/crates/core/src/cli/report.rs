use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    IdentityFailure,
    ConfigError,
    NonConvergence,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::IdentityFailure => 1,
            Status::ConfigError => 2,
            Status::NonConvergence => 3,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::DriftGate { .. }
            | Error::NonConvergence { .. }
            | Error::NoEscape { .. }
            | Error::Singular(_)
            | Error::Numerical(_)
            | Error::HorizonExhausted { .. } => Status::NonConvergence,
            _ => Status::ConfigError,
        }
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::IdentityFailure
        }
    }
}

/// One CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Formats a float the same way the JSON report does.
pub fn num(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| "NaN".into())
}

/// JSON report, CSV tables and a text summary.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub command: String,
    pub status: Status,
    pub json: serde_json::Value,
    pub tables: Vec<Table>,
    pub summary: String,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    status: Status,
    exit_code: i32,
    #[serde(flatten)]
    body: &'a serde_json::Value,
}

impl ReportBundle {
    pub fn new(command: &str, status: Status, json: serde_json::Value) -> Self {
        ReportBundle {
            command: command.to_string(),
            status,
            json,
            tables: Vec::new(),
            summary: String::new(),
        }
    }

    pub fn from_error(command: &str, error: &Error) -> Self {
        let status = Status::from_error(error);
        let mut b = ReportBundle::new(command, status, serde_json::json!({ "error": error.to_string() }));
        let _ = writeln!(b.summary, "{command}: {status:?} (exit {})", status.exit_code());
        let _ = writeln!(b.summary, "error: {error}");
        b
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn json_text(&self) -> String {
        let env = Envelope {
            tool: "mrwlab",
            version: TOOL_VERSION,
            command: &self.command,
            status: self.status,
            exit_code: self.status.exit_code(),
            body: &self.json,
        };
        let mut text = serde_json::to_string_pretty(&env).expect("report is serializable");
        text.push('\n');
        text
    }

    /// Writes `report.json`, one CSV per table and `summary.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.json_text())?;
        for t in &self.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        std::fs::write(dir.join("summary.txt"), &self.summary)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Status::from_error(&Error::EmptyModel).exit_code(), 2);
        assert_eq!(Status::from_error(&Error::DriftGate { drift: 0.0 }).exit_code(), 3);
        assert_eq!(Status::from_pass(false).exit_code(), 1);
    }

    #[test]
    fn envelope_and_csv() {
        let mut b = ReportBundle::new("validate", Status::Pass, serde_json::json!({"x": 1.5}));
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![num(0.1), num(2.0)]);
        b.tables.push(t);
        let v: serde_json::Value = serde_json::from_str(&b.json_text()).unwrap();
        assert_eq!(v["exit_code"], 0);
        assert_eq!(v["x"], 1.5);
        assert_eq!(b.tables[0].to_csv(), "a,b\n0.1,2.0\n");
        let dir = tempfile::tempdir().unwrap();
        b.write(dir.path()).unwrap();
        assert!(dir.path().join("t.csv").exists());
    }
}
