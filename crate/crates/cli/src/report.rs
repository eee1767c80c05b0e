//! Report tables and provenance headers.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Identifies one input file by path and content hash.
#[derive(Debug, Clone, Serialize)]
pub struct InputRef {
    pub path: String,
    pub sha256: String,
}

impl InputRef {
    pub fn new(path: &str, content: &[u8]) -> Self {
        InputRef {
            path: path.to_string(),
            sha256: sha256_hex(content),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub inputs: Vec<InputRef>,
    pub config: Map<String, Value>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64) -> Self {
        Provenance {
            tool: "grammol",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            inputs: Vec::new(),
            config: Map::new(),
        }
    }
}

/// A metric value or the reason it could not be computed.
#[derive(Debug, Clone)]
pub enum Cell {
    Value(f64),
    Error(String),
    Missing(&'static str),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Value(v) => format!("{v:.4}"),
            Cell::Error(_) => "error".into(),
            Cell::Missing(_) => "n/a".into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Value(v) => json!(v),
            Cell::Error(e) => json!({ "error": e }),
            Cell::Missing(why) => json!({ "missing": why }),
        }
    }
}

pub struct Report {
    pub provenance: Provenance,
    pub rows: Vec<(String, Cell)>,
}

impl Report {
    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$}  value\n", "metric");
        for (name, cell) in &self.rows {
            out.push_str(&format!("{name:<width$}  {:>8}\n", cell.text()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let metrics: Map<String, Value> = self
            .rows
            .iter()
            .map(|(k, c)| (k.clone(), c.json()))
            .collect();
        let doc = json!({ "provenance": self.provenance, "metrics": metrics });
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())
            .with_context(|| format!("cannot write report {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn table_and_json() {
        let r = Report {
            provenance: Provenance::new("evaluate", 42),
            rows: vec![
                ("uniqueness".into(), Cell::Value(0.5)),
                ("external:rs".into(), Cell::Error("timed out".into())),
                ("membership".into(), Cell::Missing("no pattern")),
            ],
        };
        let t = r.table();
        let row = t.lines().find(|l| l.starts_with("uniqueness")).unwrap();
        assert!(row.ends_with(" 0.5000"), "{row}");
        let widths: Vec<usize> = t.lines().skip(1).map(str::len).collect();
        assert!(widths.iter().all(|&w| w == widths[0]), "{t}");
        assert!(t.contains("error"));
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["metrics"]["uniqueness"], json!(0.5));
        assert_eq!(v["provenance"]["seed"], json!(42));
    }
}
