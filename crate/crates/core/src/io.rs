//! CSV tables with JSON sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `sha256` of the compact JSON serialization; struct fields serialize in
/// declaration order, so equal configs hash equally.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Shortest round-trip formatting, so equal floats print equal bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

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
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`; the sidecar carries the
/// config hash, crate version, column order and `summary`.
pub fn write_table(
    dir: &Path,
    table: &Table,
    hash: &str,
    summary: Value,
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    let sidecar = json!({
        "file": format!("{}.csv", table.name),
        "config_hash": hash,
        "version": VERSION,
        "columns": table.header,
        "rows": table.rows.len(),
        "summary": summary,
    });
    write_json(&dir.join(format!("{}.json", table.name)), &sidecar)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
