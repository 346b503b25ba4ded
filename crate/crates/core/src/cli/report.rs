//! Versioned report with exact operands, emitted as JSON or CSV.

use std::fmt::{self, Display};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::config::ExperimentConfig;

pub const SCHEMA: &str = "dslab-report/1";

/// Failing instances kept per check in suite runs.
pub const MAX_LISTED_FAILURES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// One asserted relation with its operands as exact strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub item: String,
    pub lhs: String,
    pub relation: Relation,
    pub rhs: String,
    pub holds: bool,
}

impl Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.holds { "ok" } else { "FAILED" };
        write!(f, "{status} {} [{}]: {} {} {}", self.check, self.item, self.lhs, self.relation, self.rhs)
    }
}

/// A table column; rational columns split into `_num` and `_den` in CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(default)]
    pub rational: bool,
}

pub fn col(name: &str) -> Column {
    Column { name: name.into(), rational: false }
}

pub fn rcol(name: &str) -> Column {
    Column { name: name.into(), rational: true }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub columns: Vec<Column>,
    pub rows: Vec<Map<String, Value>>,
    pub summary: Map<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
}

impl Report {
    pub fn new(command: &str, config: ExperimentConfig, columns: Vec<Column>) -> Self {
        Report {
            schema: SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            columns,
            rows: Vec::new(),
            summary: Map::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
            passed: true,
            timing_ms: None,
        }
    }

    pub fn row(&mut self, value: Value) {
        match value {
            Value::Object(m) => self.rows.push(m),
            other => panic!("row must be an object, got {other}"),
        }
    }

    pub fn summarize(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.into(), value.into());
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    /// Records `lhs relation rhs` with the given outcome.
    pub fn verdict(
        &mut self,
        check: &str,
        item: impl Display,
        lhs: impl Display,
        relation: Relation,
        rhs: impl Display,
        holds: bool,
    ) -> bool {
        self.passed &= holds;
        self.verdicts.push(Verdict {
            check: check.into(),
            item: item.to_string(),
            lhs: lhs.to_string(),
            relation,
            rhs: rhs.to_string(),
            holds,
        });
        holds
    }

    /// Compares two ordered values and records the result.
    pub fn assert_rel<T: PartialOrd + Display>(&mut self, check: &str, item: impl Display, lhs: &T, relation: Relation, rhs: &T) -> bool {
        let holds = match relation {
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        };
        self.verdict(check, item, lhs, relation, rhs, holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.holds)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Report> {
        serde_json::from_slice(bytes)
    }

    /// Header row, then one line per row; missing cells are empty.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: Vec<String> = self
            .columns
            .iter()
            .flat_map(|c| {
                if c.rational {
                    vec![format!("{}_num", c.name), format!("{}_den", c.name)]
                } else {
                    vec![c.name.clone()]
                }
            })
            .collect();
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut record = Vec::with_capacity(header.len());
            for c in &self.columns {
                let cell = row.get(&c.name).map(cell_text).unwrap_or_default();
                if c.rational {
                    let (num, den) = cell.split_once('/').map_or((cell.clone(), String::new()), |(a, b)| (a.into(), b.into()));
                    record.push(num);
                    record.push(den);
                } else {
                    record.push(cell);
                }
            }
            w.write_record(&record).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
