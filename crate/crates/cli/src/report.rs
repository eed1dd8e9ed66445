//! Report documents and their JSON / CSV renderings.
//!
//! JSON layout:
//!
//! ```json
//! {
//!   "kind": "scores",
//!   "meta": {"tool": "kernelspect", "version": "0.1.0", "snapshot": "tinynet",
//!            "thresholds": [{"mode": "det", "kernel_size": 1, "value": 0.0001}],
//!            "timestamp": null},
//!   "records": [{"mode": "det", "pruned_kernels": 1}]
//! }
//! ```
//!
//! CSV carries the header row and the records only. Floats use the shortest
//! representation that round-trips, identically in both formats.
//! `timestamp` is taken from `SOURCE_DATE_EPOCH` (seconds) when set, so
//! repeated runs stay byte-identical.

use std::fmt;

use kernelspect_core::modes::ThresholdTable;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Scores,
    MasksSummary,
    Sets,
    Layers,
    History,
    ComplexStats,
    Eval,
    Sweep,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Scores => "scores",
            ReportKind::MasksSummary => "masks_summary",
            ReportKind::Sets => "sets",
            ReportKind::Layers => "layers",
            ReportKind::History => "history",
            ReportKind::ComplexStats => "complex_stats",
            ReportKind::Eval => "eval",
            ReportKind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn csv_field(&self) -> String {
        match self {
            Cell::Null => String::new(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_finite() => serde_json::to_string(v).expect("finite float"),
            Cell::Float(_) => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Null => s.serialize_none(),
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Float(v) => s.serialize_f64(*v),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub version: String,
    pub snapshot: String,
    pub thresholds: ThresholdTable,
    pub timestamp: Option<u64>,
}

impl Meta {
    pub fn new(snapshot: impl Into<String>, thresholds: &ThresholdTable) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            snapshot: snapshot.into(),
            thresholds: thresholds.clone(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH")
                .ok()
                .and_then(|v| v.trim().parse().ok()),
        }
    }
}

#[derive(Serialize)]
struct ThresholdEntry {
    mode: &'static str,
    kernel_size: usize,
    value: f64,
}

struct ThresholdList<'a>(&'a ThresholdTable);

impl Serialize for ThresholdList<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(None)?;
        for (mode, size, value) in self.0.entries() {
            seq.serialize_element(&ThresholdEntry {
                mode: mode.as_str(),
                kernel_size: size,
                value,
            })?;
        }
        seq.end()
    }
}

impl Serialize for Meta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(5))?;
        m.serialize_entry("tool", "kernelspect")?;
        m.serialize_entry("version", &self.version)?;
        m.serialize_entry("snapshot", &self.snapshot)?;
        m.serialize_entry("thresholds", &ThresholdList(&self.thresholds))?;
        m.serialize_entry("timestamp", &self.timestamp)?;
        m.end()
    }
}

/// A typed table: fixed columns per kind, one row per record.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocument {
    pub kind: ReportKind,
    pub meta: Meta,
    columns: Vec<String>,
    records: Vec<Vec<Cell>>,
}

impl ReportDocument {
    pub fn new(kind: ReportKind, meta: Meta, columns: &[&str]) -> Self {
        Self {
            kind,
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            records: Vec::new(),
        }
    }

    pub fn with_columns(kind: ReportKind, meta: Meta, columns: Vec<String>) -> Self {
        Self {
            kind,
            meta,
            columns,
            records: Vec::new(),
        }
    }

    /// Appends a row; panics if its width differs from the column count.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.kind);
        self.records.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn records(&self) -> &[Vec<Cell>] {
        &self.records
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory csv");
        for row in &self.records {
            w.write_record(row.iter().map(Cell::csv_field))
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

struct Row<'a>(&'a [String], &'a [Cell]);

impl Serialize for Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl Serialize for ReportDocument {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row<'_>> = self.records.iter().map(|r| Row(&self.columns, r)).collect();
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("kind", self.kind.as_str())?;
        m.serialize_entry("meta", &self.meta)?;
        m.serialize_entry("records", &rows)?;
        m.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kernelspect_core::modes::default_thresholds;

    fn sample() -> ReportDocument {
        let mut meta = Meta::new("t", &default_thresholds());
        meta.timestamp = None;
        let mut d = ReportDocument::new(ReportKind::Scores, meta, &["mode", "ratio", "count", "acc"]);
        d.push(vec!["det".into(), 0.1.into(), 3usize.into(), Cell::Null]);
        d.push(vec!["a,b".into(), (1.0 / 3.0).into(), 0usize.into(), 1e-300.into()]);
        d
    }

    #[test]
    fn json_layout() {
        let v: serde_json::Value = serde_json::from_str(&sample().to_json()).unwrap();
        assert_eq!(v["kind"], "scores");
        assert_eq!(v["meta"]["tool"], "kernelspect");
        assert_eq!(v["meta"]["thresholds"].as_array().unwrap().len(), 24);
        assert_eq!(v["records"][0]["mode"], "det");
        assert!(v["records"][0]["acc"].is_null());
        let text = sample().to_json();
        assert!(text.find("\"mode\"").unwrap() < text.find("\"ratio\"").unwrap());
    }

    #[test]
    fn csv_matches_json_numbers() {
        let d = sample();
        let csv_text = d.to_csv();
        assert!(csv_text.starts_with("mode,ratio,count,acc\r\n"));
        let json: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        let mut r = csv::Reader::from_reader(csv_text.as_bytes());
        for (row, rec) in r.records().zip(json["records"].as_array().unwrap()) {
            let row = row.unwrap();
            assert_eq!(&row[0], rec["mode"].as_str().unwrap());
            assert_eq!(row[1].parse::<f64>().unwrap(), rec["ratio"].as_f64().unwrap());
            assert_eq!(row[2].parse::<u64>().unwrap(), rec["count"].as_u64().unwrap());
        }
    }

    #[test]
    #[should_panic]
    fn row_width_checked() {
        sample().push(vec![Cell::Null]);
    }
}
