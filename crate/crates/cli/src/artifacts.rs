//! Artifact files: atomic writes, the JSON envelope and the sweep table.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use homoglab_core::audit::SweepRow;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA: &str = "audit-v1";
pub const REPORT_FILE: &str = "report.json";
pub const FAILURE_MARKER: &str = "FAILED";

/// Top-level JSON report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema: String,
    pub pipeline: String,
    pub config: Value,
    /// File names of the other artifacts written next to the report.
    pub artifacts: Vec<String>,
    pub results: Value,
}

/// Writes into `dir`, each file through a temporary name and a rename.
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_with<F>(&mut self, name: &str, fill: F) -> io::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        {
            let mut buf = io::BufWriter::new(tmp.as_file_mut());
            fill(&mut buf)?;
            buf.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(name)).map_err(|e| e.error)?;
        if name != REPORT_FILE && name != FAILURE_MARKER && !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        self.write_with(name, |w| w.write_all(bytes))
    }

    pub fn write_report(&mut self, envelope: &Envelope) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(envelope).map_err(io::Error::other)?;
        text.push('\n');
        self.write_bytes(REPORT_FILE, text.as_bytes())
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    eps: f64,
    h: f64,
    delta: f64,
    mid: f64,
    #[serde(rename = "M")]
    big_m: f64,
    term1: f64,
    term2: f64,
    c_hat: Option<f64>,
    defect: f64,
    failed: Option<&'a str>,
}

pub fn sweep_csv(rows: &[SweepRow<f64>]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow {
            eps: r.eps,
            h: r.h,
            delta: r.delta,
            mid: r.mid,
            big_m: r.big_m,
            term1: r.term1,
            term2: r.term2,
            c_hat: r.c_hat,
            defect: r.defect,
            failed: r.failed.as_deref(),
        })
        .map_err(io::Error::other)?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

pub fn read_envelope(path: &Path) -> io::Result<Envelope> {
    let file = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
