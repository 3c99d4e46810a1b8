//! CSV metric files and the per-stage run manifest.
//!
//! Everything is written with fixed formatting so a rerun with the same seed
//! produces byte-identical files.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Simple CSV accumulator with a fixed header.
#[derive(Debug, Clone)]
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv { buf: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width");
        let _ = writeln!(self.buf, "{}", cells.join(","));
    }

    pub fn contents(&self) -> &str {
        &self.buf
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, &self.buf)
    }
}

/// Fixed-precision float formatting used in every CSV cell.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

/// Content hash of a list of input files (order-sensitive), hex-encoded.
pub fn content_hash(paths: &[&Path]) -> io::Result<String> {
    let mut hasher = Sha256::new();
    for p in paths {
        hasher.update(p.to_string_lossy().as_bytes());
        hasher.update([0u8]);
        hasher.update(fs::read(p)?);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Write the stage manifest: stage name, seed, workers, config snapshot and
/// a hash of the consumed input artifacts. Enough to re-run bit-identically.
pub fn write_manifest(
    dir: &Path,
    stage: &str,
    seed: u64,
    workers: usize,
    config_snapshot: &str,
    inputs: &[&Path],
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let hash = content_hash(inputs)?;
    let mut out = String::new();
    let _ = writeln!(out, "stage {stage}");
    let _ = writeln!(out, "seed {seed}");
    let _ = writeln!(out, "workers {workers}");
    let _ = writeln!(out, "inputs_sha256 {hash}");
    for p in inputs {
        let _ = writeln!(out, "input {}", p.display());
    }
    let _ = writeln!(out, "config_begin");
    out.push_str(config_snapshot);
    let _ = writeln!(out, "config_end");
    fs::write(dir.join("manifest.txt"), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_is_stable() {
        let mut csv = Csv::new(&["epoch", "value"]);
        csv.row(&["0".into(), fmt_f(0.5)]);
        csv.row(&["1".into(), fmt_f(1.0 / 3.0)]);
        assert_eq!(csv.contents(), "epoch,value\n0,0.500000\n1,0.333333\n");
    }

    #[test]
    fn manifest_records_inputs_and_config() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("input.bin");
        std::fs::write(&input, b"abc").unwrap();
        write_manifest(dir.path(), "demo", 7, 2, "k=v\n", &[&input]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert!(text.contains("stage demo"));
        assert!(text.contains("seed 7"));
        assert!(text.contains("k=v"));
        assert!(text.contains("inputs_sha256 "));
    }
}
