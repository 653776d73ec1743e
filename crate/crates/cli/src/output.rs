//! CSV and JSON writers. Files are written to a temporary sibling and
//! renamed into place so readers never see partial output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Round-trip exact text for a float: 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    fn to_bytes(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| output_error(root, e))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(|e| output_error(&path, e))?;
        tmp.write_all(bytes).map_err(|e| output_error(&path, e))?;
        tmp.persist(&path).map_err(|e| output_error(&path, e.error))?;
        Ok(path)
    }

    /// Writes a CSV file and prints its summary line.
    pub fn csv(&self, name: &str, table: &Table, summary: &str) -> Result<(), CliError> {
        let bytes = table.to_bytes().map_err(|e| output_error(&self.root.join(name), e))?;
        let path = self.write_atomic(name, &bytes)?;
        println!("{}: {} rows; {summary}", path.display(), table.len());
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T, summary: &str) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| output_error(&self.root.join(name), e))?;
        text.push('\n');
        let path = self.write_atomic(name, text.as_bytes())?;
        println!("{}: {summary}", path.display());
        Ok(())
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}
