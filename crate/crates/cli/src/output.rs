//! CSV/JSON emission and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Version of the CSV and JSON column layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// One CSV cell.
#[derive(Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64.
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
    bytes: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    columns: Vec<String>,
}

/// Collects emitted files and run diagnostics for the manifest.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
    pub residuals: Map<String, Value>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            residuals: Map::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str, bytes: &[u8], columns: Vec<String>) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
            columns,
        });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.record(name, &bytes, header.iter().map(|s| s.to_string()).collect())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(steadywave::Error::from)?;
        bytes.push(b'\n');
        self.record(name, &bytes, Vec::new())
    }

    pub fn residual(&mut self, key: &str, value: impl Into<Value>) {
        self.residuals.insert(key.to_string(), value.into());
    }

    /// Writes `manifest.json` listing every file emitted so far.
    pub fn finish(mut self, header: Value, status: Result<(), &CliError>) -> Result<(), CliError> {
        let (status, code, error) = match status {
            Ok(()) => ("ok", 0, Value::Null),
            Err(e) => ("error", e.exit_code(), Value::String(e.to_string())),
        };
        let files = std::mem::take(&mut self.files);
        let mut manifest = json!({
            "schema_version": SCHEMA_VERSION,
            "steadywave_version": env!("CARGO_PKG_VERSION"),
            "status": status,
            "exit_code": code,
            "error": error,
            "residuals": Value::Object(std::mem::take(&mut self.residuals)),
            "files": files,
        });
        if let (Value::Object(m), Value::Object(h)) = (&mut manifest, header) {
            for (k, v) in h {
                m.insert(k, v);
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(steadywave::Error::from)?;
        bytes.push(b'\n');
        fs::write(self.dir.join("manifest.json"), bytes)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

pub fn config_hash(bytes: &[u8]) -> String {
    sha256_hex(bytes)
}
