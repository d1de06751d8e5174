//! Report directories: named output files plus a manifest with their digests.
//!
//! Files carry no timestamps or timings, so identical inputs give identical
//! bytes and hence identical manifests.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;

pub const TOOL: &str = "schottky-thermo";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

/// Output files of one command, kept in memory until emitted.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub group_fingerprint: Option<String>,
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub group_fingerprint: Option<String>,
    pub files: Vec<FileEntry>,
}

impl Report {
    pub fn new(command: &str, config_hash: &str, group_fingerprint: Option<String>) -> Self {
        Self { command: command.into(), config_hash: config_hash.into(), group_fingerprint, files: Vec::new() }
    }

    pub fn add_bytes(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Pretty JSON with a trailing newline.
    pub fn add_json<S: Serialize>(&mut self, name: &str, value: &S) {
        self.add_bytes(name, to_json(value));
    }

    pub fn add_text(&mut self, name: &str, text: String) {
        self.add_bytes(name, text.into_bytes());
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: self.command.clone(),
            config_hash: self.config_hash.clone(),
            group_fingerprint: self.group_fingerprint.clone(),
            files: self
                .files
                .iter()
                .map(|(name, bytes)| FileEntry {
                    name: name.clone(),
                    bytes: bytes.len() as u64,
                    sha256: hex(&Sha256::digest(bytes)),
                })
                .collect(),
        }
    }

    pub fn manifest_bytes(&self) -> Vec<u8> {
        to_json(&self.manifest())
    }
}

pub fn to_json<S: Serialize>(value: &S) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report values serialize");
    v.push(b'\n');
    v
}

/// Writes every file of `report` and its manifest into `dir`, creating it.
pub fn emit_report(report: &Report, dir: &Path) -> io::Result<Manifest> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &report.files {
        fs::write(dir.join(name), bytes)?;
    }
    let manifest = report.manifest();
    fs::write(dir.join(MANIFEST), to_json(&manifest))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_directory_is_created() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("a/b/c");
        let mut r = Report::new("delta", "abc", None);
        r.add_text("x.txt", "hello\n".into());
        let m = emit_report(&r, &dir).unwrap();
        assert_eq!(fs::read_to_string(dir.join("x.txt")).unwrap(), "hello\n");
        assert_eq!(m.files[0].bytes, 6);
        let on_disk: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(on_disk, m);
    }

    #[test]
    fn manifest_tracks_contents() {
        let mut a = Report::new("delta", "abc", Some("f".into()));
        a.add_json("s.json", &serde_json::json!({"delta": 0.5}));
        let mut b = a.clone();
        assert_eq!(a.manifest_bytes(), b.manifest_bytes());
        b.add_text("extra.csv", String::new());
        assert_ne!(a.manifest_bytes(), b.manifest_bytes());
        let mut c = Report::new("delta", "abc", Some("f".into()));
        c.add_json("s.json", &serde_json::json!({"delta": 0.25}));
        assert_ne!(a.manifest().files[0].sha256, c.manifest().files[0].sha256);
    }
}
