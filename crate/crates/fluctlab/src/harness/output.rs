//! Output emission: RFC-4180 CSV tables with a header row, a JSON run
//! manifest with checksums, and a gnuplot-dialect plot script referencing the
//! CSVs. File naming is deterministic: `<runID>-<name>.csv` with
//! runID = `<experiment>-<seed:08x>`.

use crate::error::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// A value cell; floats are rendered with full precision so reruns are
/// byte-identical.
#[derive(Debug, Clone)]
pub enum Cell {
    Str(String),
    Int(i64),
    Float(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) => {
                if f.is_finite() {
                    format!("{f:.17e}")
                } else {
                    format!("{f}")
                }
            }
        }
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Str(if v { "true".into() } else { "false".into() })
    }
}

/// Record of one emitted file.
#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub rows: usize,
}

/// Collects emitted files for the manifest.
pub struct OutputWriter {
    dir: PathBuf,
    run_id: String,
    pub files: Vec<FileRecord>,
    plot_stanzas: Vec<String>,
}

impl OutputWriter {
    pub fn new(dir: &Path, run_id: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            run_id: run_id.to_string(),
            files: Vec::new(),
            plot_stanzas: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file_name(&self, name: &str, ext: &str) -> String {
        format!("{}-{name}.{ext}", self.run_id)
    }

    /// Write a CSV table (header + rows) and record its checksum.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<PathBuf> {
        let fname = self.file_name(name, "csv");
        let path = self.dir.join(&fname);
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        writer
            .write_record(header)
            .map_err(|e| Error::Config(e.to_string()))?;
        for row in rows {
            let rendered: Vec<String> = row.iter().map(|c| c.render()).collect();
            writer
                .write_record(&rendered)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, &bytes).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.files.push(FileRecord {
            name: fname,
            sha256: hex::encode(Sha256::digest(&bytes)),
            rows: rows.len(),
        });
        Ok(path)
    }

    /// Queue a plot stanza; `emit_plot_script` writes them all.
    pub fn add_plot(&mut self, title: &str, csv_name: &str, using: &str, ylabel: &str) {
        let csv = self.file_name(csv_name, "csv");
        self.plot_stanzas.push(format!(
            "set title '{title}'\nset ylabel '{ylabel}'\nplot '{csv}' using {using} with linespoints\n"
        ));
    }

    pub fn emit_plot_script(&mut self) -> Result<Option<PathBuf>> {
        if self.plot_stanzas.is_empty() {
            return Ok(None);
        }
        let fname = self.file_name("plots", "gp");
        let path = self.dir.join(&fname);
        let mut text = String::from(
            "# gnuplot script; run from the output directory\nset datafile separator ','\nset key autotitle columnhead\nset grid\n",
        );
        for s in &self.plot_stanzas {
            text.push_str("\n");
            text.push_str(s);
            text.push_str("pause -1 'press enter'\n");
        }
        std::fs::write(&path, text.as_bytes()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.files.push(FileRecord {
            name: fname,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
            rows: 0,
        });
        Ok(Some(path))
    }
}

/// Seeded, versioned record of a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub experiment: String,
    pub run_id: String,
    pub master_seed: u64,
    pub workers: usize,
    pub wall_clock_secs: f64,
    pub stage_seeds: std::collections::BTreeMap<String, u64>,
    pub config: serde_json::Value,
    pub files: Vec<FileRecord>,
    pub metrics: serde_json::Map<String, serde_json::Value>,
    pub pass: bool,
    pub failures: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}-manifest.json", self.run_id));
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(path)
    }
}
