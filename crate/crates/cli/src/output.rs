use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Output directory of one invocation. Every file it writes carries the
/// same config hash.
pub struct OutDir {
    root: PathBuf,
    hash: String,
}

impl OutDir {
    pub fn create(root: &Path, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf(), hash: hash.to_string() })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.root.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
    }

    fn io_err(&self, name: &str, e: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("cannot write {}: {e}", self.root.join(name).display()))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| self.io_err(name, e))?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| self.io_err(name, e))
    }

    /// CSV with a `# config_hash=...` comment line above the header.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        writeln!(w, "# config_hash={}", self.hash).map_err(|e| self.io_err(name, e))?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(header).map_err(|e| self.io_err(name, e))?;
        for row in rows {
            csv.write_record(row).map_err(|e| self.io_err(name, e))?;
        }
        csv.flush().map_err(|e| self.io_err(name, e))
    }

    pub fn text(&self, name: &str, body: &str) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| self.io_err(name, e))
    }

    /// Writes through a closure that produces raw bytes.
    pub fn with<F>(&self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let mut w = self.open(name)?;
        f(&mut w).and_then(|_| w.flush()).map_err(|e| self.io_err(name, e))
    }
}

/// Fixed-precision float for CSV and summaries.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_give_header_only() {
        let dir = std::env::temp_dir().join(format!("convlab-out-{}", std::process::id()));
        let out = OutDir::create(&dir, "abc").unwrap();
        out.csv("winners.csv", &["name", "count"], &[]).unwrap();
        let text = fs::read_to_string(dir.join("winners.csv")).unwrap();
        assert_eq!(text, "# config_hash=abc\nname,count\n");
        fs::remove_dir_all(dir).unwrap();
    }
}
