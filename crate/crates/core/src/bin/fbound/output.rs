use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::CliError;

/// Rows of already-formatted fields under a header.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal; `nan` for missing values.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        v.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Collects what a run produced and writes the tables plus the manifest.
pub struct Run {
    command: &'static str,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        Run {
            command,
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    /// Writes `table` to `path`, or to stdout when no path is given.
    pub fn emit(&mut self, table: &Table, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => {
                let f = File::create(p).map_err(|e| CliError::Io(format!("cannot create {}: {e}", p.display())))?;
                table.write_to(io::BufWriter::new(f))?;
                self.outputs.push(p.to_path_buf());
            }
            None => table.write_to(io::stdout().lock())?,
        }
        Ok(())
    }

    /// `<primary>.manifest.json` next to the primary output; skipped for stdout runs.
    pub fn finish(self, primary: Option<&Path>, params: Value, cfg: Value, diagnostics: Value) -> Result<(), CliError> {
        let Some(primary) = primary else {
            return Ok(());
        };
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let manifest = json!({
            "command": self.command,
            "params": params,
            "cfg": cfg,
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "diagnostics": diagnostics,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}
