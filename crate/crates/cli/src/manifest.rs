//! `manifest.txt`: config echo, tool version, phase timings and a SHA-256 of
//! every output file.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub version: String,
    pub config: String,
    pub seed: u64,
    pub threads: usize,
    pub timings: Vec<(String, f64)>,
    /// `(file name, hex digest)`, sorted by name.
    pub files: Vec<(String, String)>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    /// Hashes every regular file in `dir` except the manifest itself.
    pub fn collect(dir: &Path, config: String, seed: u64, threads: usize, timings: Vec<(String, f64)>) -> Result<Self, CliError> {
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.file_type()?.is_file() && name != MANIFEST {
                files.push((name, sha256_file(&entry.path())?));
            }
        }
        files.sort();
        Ok(RunManifest { version: env!("CARGO_PKG_VERSION").into(), config, seed, threads, timings, files })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "fracplane {}", self.version).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "threads {}", self.threads).unwrap();
        writeln!(out, "\n[timings]").unwrap();
        for (phase, secs) in &self.timings {
            writeln!(out, "{phase} {secs:.3}s").unwrap();
        }
        writeln!(out, "\n[files]").unwrap();
        for (name, digest) in &self.files {
            writeln!(out, "{digest}  {name}").unwrap();
        }
        writeln!(out, "\n[config]").unwrap();
        out.push_str(&self.config);
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::write(dir.join(MANIFEST), self.render())?;
        Ok(())
    }
}

/// Re-hashes the files listed in a rendered manifest; returns the names that
/// are missing or differ.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let mut bad = Vec::new();
    let mut in_files = false;
    for line in text.lines() {
        if line.starts_with('[') {
            in_files = line == "[files]";
            continue;
        }
        if !in_files || line.is_empty() {
            continue;
        }
        let Some((digest, name)) = line.split_once("  ") else {
            bad.push(line.to_string());
            continue;
        };
        match sha256_file(&dir.join(name)) {
            Ok(d) if d == digest => {}
            _ => bad.push(name.to_string()),
        }
    }
    Ok(bad)
}
