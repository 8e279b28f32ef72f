//! Output directory: pretty JSON summaries, CSV tables and a JSON-lines log.
//! Nothing written here depends on wall-clock time, so reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub struct OutputDir {
    root: PathBuf,
    log: BufWriter<File>,
}

impl OutputDir {
    /// Create the directory and open `run.jsonl`.
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let log_path = root.join("run.jsonl");
        let log = File::create(&log_path).map_err(|e| io_err(&log_path, e))?;
        Ok(Self { root: root.to_path_buf(), log: BufWriter::new(log) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Append one event to the run log.
    pub fn log<T: Serialize>(&mut self, event: &T) -> Result<(), CliError> {
        let line = serde_json::to_string(event).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(self.log, "{line}").map_err(|e| io_err(&self.root.join("run.jsonl"), e))?;
        self.log.flush().map_err(|e| io_err(&self.root.join("run.jsonl"), e))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// One JSON document per line.
    pub fn jsonl<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        for r in rows {
            let line = serde_json::to_string(r).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// CSV with a header row; every row must have the header's length.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            w.write_record(r).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

/// Shortest round-trip representation, so CSV values parse back exactly.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
