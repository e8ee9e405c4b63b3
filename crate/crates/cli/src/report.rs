use std::fmt;
use std::path::Path;

use serde_json::{Map, Value};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const TIMING_JSON: &str = "timing.json";

#[derive(Debug)]
pub enum ReportError {
    EmptyReport,
    Io(String),
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportError::EmptyReport => write!(f, "refusing to write an empty report"),
            ReportError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for ReportError {}

impl From<std::io::Error> for ReportError {
    fn from(e: std::io::Error) -> Self {
        ReportError::Io(e.to_string())
    }
}

impl From<csv::Error> for ReportError {
    fn from(e: csv::Error) -> Self {
        ReportError::Io(e.to_string())
    }
}

/// Flat record of one computation. Keys keep insertion order, which is the
/// CSV column order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportRow {
    fields: Vec<(String, Value)>,
}

impl ReportRow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        let v = v.into();
        match self.fields.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = v,
            None => self.fields.push((key.to_string(), v)),
        }
        self
    }

    /// Non-finite numbers are stored as null.
    pub fn num(&mut self, key: &str, x: f64) -> &mut Self {
        let v = serde_json::Number::from_f64(x)
            .map(Value::Number)
            .unwrap_or(Value::Null);
        self.set(key, v)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|(k, _)| k.as_str())
    }

    pub fn is_error(&self) -> bool {
        self.get("status").and_then(Value::as_str) == Some("error")
    }

    fn to_object(&self) -> Map<String, Value> {
        self.fields.iter().cloned().collect()
    }
}

/// Shared header of both report files.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub subcommand: String,
    pub config_hash: String,
    pub version: String,
}

pub fn report_json(meta: &ReportMeta, rows: &[ReportRow]) -> String {
    let mut doc = Map::new();
    doc.insert("config_hash".into(), meta.config_hash.clone().into());
    doc.insert("version".into(), meta.version.clone().into());
    doc.insert("subcommand".into(), meta.subcommand.clone().into());
    doc.insert(
        "rows".into(),
        Value::Array(rows.iter().map(|r| Value::Object(r.to_object())).collect()),
    );
    canonical_json(&Value::Object(doc))
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn canonical_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Floats with 17 significant digits, integers and booleans verbatim,
/// null as an empty field.
fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if n.is_f64() {
                format!("{:.16e}", n.as_f64().expect("f64 number"))
            } else {
                n.to_string()
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn report_csv(rows: &[ReportRow]) -> Result<String, ReportError> {
    let mut columns: Vec<&str> = Vec::new();
    for r in rows {
        for k in r.keys() {
            if !columns.contains(&k) {
                columns.push(k);
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&columns)?;
    for r in rows {
        w.write_record(
            columns
                .iter()
                .map(|c| r.get(c).map(csv_field).unwrap_or_default()),
        )?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn emit_report(meta: &ReportMeta, rows: &[ReportRow], dir: &Path) -> Result<(), ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyReport);
    }
    let csv = report_csv(rows)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(REPORT_JSON), report_json(meta, rows))?;
    std::fs::write(dir.join(REPORT_CSV), csv)?;
    Ok(())
}

/// Wall times are kept out of the reports so those stay byte-stable.
pub fn emit_timing(dir: &Path, total: f64, per_row: &[f64]) -> Result<(), ReportError> {
    let mut doc = Map::new();
    doc.insert("wall_seconds".into(), Value::from(total));
    doc.insert("row_wall_seconds".into(), Value::from(per_row.to_vec()));
    std::fs::write(dir.join(TIMING_JSON), canonical_json(&Value::Object(doc)))?;
    Ok(())
}
