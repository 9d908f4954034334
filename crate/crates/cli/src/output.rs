//! Atomic artifact writing and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cat_amp::{DensityOp, C64};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

/// Formats a value with 9 significant digits.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Directory receiving a run's artifacts; every file lands via temp + rename.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut tmp = NamedTempFile::new_in(path.parent().unwrap_or(&self.root))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// RFC-4180 table of floats at 9 significant digits.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(io::Error::other)?;
        for row in rows {
            w.write_record(row.iter().map(|x| sig9(*x))).map_err(io::Error::other)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    /// `i,j,re,im,abs` rows of a density matrix.
    pub fn write_density(&mut self, name: &str, rho: &DensityOp) -> io::Result<()> {
        let m = rho.matrix();
        let mut rows = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z: C64 = m[(i, j)];
                rows.push(vec![i as f64, j as f64, z.re, z.im, z.norm()]);
            }
        }
        self.write_csv(name, &["i", "j", "re", "im", "abs"], &rows)
    }
}

/// Record of one invocation, enough to repeat it.
#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub table_version: &'static str,
    pub command: Vec<String>,
    pub config: Value,
    pub config_sha256: String,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: Vec<String>, config: Value, started: Instant, outputs: &[String]) -> Self {
        let canonical = serde_json::to_vec(&config).unwrap_or_default();
        Self {
            tool: "cat-amp",
            version: env!("CARGO_PKG_VERSION"),
            table_version: cat_amp::pulses::TABLE_VERSION,
            command,
            config_sha256: sha256_hex(&canonical),
            config,
            wall_seconds: started.elapsed().as_secs_f64(),
            outputs: outputs.to_vec(),
        }
    }
}
