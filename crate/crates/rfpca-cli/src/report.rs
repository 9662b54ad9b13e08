//! Run reports: inputs, resolved configuration, timings, warnings, and a
//! manifest of every emitted file with its content hash.
//!
//! A report plus the input files is enough to rerun a command exactly: the
//! config echo holds every resolved setting (flag overrides included), and
//! the SHA-256 digests pin what was read and written. The report itself is
//! the one artifact without a recorded hash, since it cannot contain its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_at, CliResult};
use crate::formats::{write_atomic, FORMAT_VERSION};

// ===== digests =====

/// A file the run touched, hashed for exact reproduction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn digest_file(path: &Path) -> CliResult<FileDigest> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

// ===== the report =====

/// Everything a command reports about one run.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub format_version: u32,
    pub command: String,
    pub inputs: Vec<FileDigest>,
    /// Resolved settings the command ran with, flag overrides applied.
    pub config: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub outputs: Vec<FileDigest>,
    #[serde(skip)]
    started: Instant,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            inputs: Vec::new(),
            config: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Hashes an input file into the report.
    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    /// Hashes an already-written output file into the manifest.
    pub fn add_output(&mut self, path: &Path) -> CliResult<()> {
        self.outputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn add_warning(&mut self, warning: impl Into<String>) {
        self.warnings.push(warning.into());
    }

    /// Records a named phase duration in milliseconds.
    pub fn add_timing(&mut self, phase: &str, since: Instant) {
        self.timings_ms
            .insert(phase.to_string(), since.elapsed().as_secs_f64() * 1e3);
    }

    /// Stamps the total runtime and writes the report atomically.
    pub fn write(mut self, path: &Path) -> CliResult<()> {
        self.timings_ms.insert(
            "total".to_string(),
            self.started.elapsed().as_secs_f64() * 1e3,
        );
        let json =
            serde_json::to_string_pretty(&self).expect("report serialization is infallible");
        write_atomic(path, format!("{json}\n").as_bytes())
    }
}

// ===== tests =====

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vectors() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn report_lists_outputs_with_hashes() {
        let dir = std::env::temp_dir().join(format!("rfpca-report-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let artifact = dir.join("out.csv");
        fs::write(&artifact, b"abc").unwrap();

        let mut report = RunReport::new("median");
        report.add_output(&artifact).unwrap();
        report.add_warning("w");
        let report_path = dir.join("report.json");
        report.write(&report_path).unwrap();

        let text = fs::read_to_string(&report_path).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["command"], "median");
        assert_eq!(value["outputs"][0]["bytes"], 3);
        assert_eq!(
            value["outputs"][0]["sha256"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(value["warnings"][0], "w");
        assert!(value["timings_ms"]["total"].as_f64().unwrap() >= 0.0);
    }
}
