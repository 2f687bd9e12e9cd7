//! Run manifests: one `manifest.json` per output directory.
//!
//! The digest covers everything except timestamps, so reruns with the same command, seed and
//! input files share a digest. CSV outputs start with a `#` comment carrying it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use boltzmap::data::sha256_hex;
use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct Identity<'a> {
    command: &'a str,
    argv: &'a [String],
    config: &'a Value,
    seed: u64,
    versions: &'a BTreeMap<&'static str, &'static str>,
    inputs: &'a BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    identity: Identity<'a>,
    outputs: &'a [String],
    digest: &'a str,
    started_unix: u64,
    finished_unix: u64,
}

pub struct Run {
    command: &'static str,
    argv: Vec<String>,
    seed: u64,
    config: Value,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    started: u64,
    versions: BTreeMap<&'static str, &'static str>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl Run {
    pub fn new(command: &'static str, seed: u64, config: Value) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("boltzmap", env!("CARGO_PKG_VERSION"));
        versions.insert("model_format", boltzmap::model::RBM_HEADER);
        Self {
            command,
            argv: std::env::args().skip(1).collect(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started: unix_now(),
            versions,
        }
    }

    /// Reads an input file, recording its SHA-256.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn read_input_text(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read_input(path)?;
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 text", path.display()))
    }

    fn identity(&self) -> Identity<'_> {
        Identity {
            command: self.command,
            argv: &self.argv,
            config: &self.config,
            seed: self.seed,
            versions: &self.versions,
            inputs: &self.inputs,
        }
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_string(&self.identity()).expect("manifest serializes");
        sha256_hex(json.as_bytes())
    }

    pub fn csv_header(&self) -> String {
        format!("# boltzmap {} manifest-sha256={}\n", self.command, self.digest())
    }

    /// Writes a CSV output prefixed with the manifest comment.
    pub fn write_csv(&mut self, path: &Path, body: &str) -> Result<()> {
        let mut text = self.csv_header();
        text.push_str(body);
        self.write_raw(path, &text)
    }

    pub fn write_raw(&mut self, path: &Path, text: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Writes `manifest.json` next to every output (one per directory).
    pub fn finish(self) -> Result<()> {
        if self.outputs.is_empty() {
            return Ok(());
        }
        let digest = self.digest();
        let finished = unix_now();
        let mut by_dir: BTreeMap<PathBuf, Vec<String>> = BTreeMap::new();
        for out in &self.outputs {
            let dir = out
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            by_dir
                .entry(dir)
                .or_default()
                .push(out.display().to_string());
        }
        for (dir, outputs) in by_dir {
            let manifest = Manifest {
                identity: self.identity(),
                outputs: &outputs,
                digest: &digest,
                started_unix: self.started,
                finished_unix: finished,
            };
            let path = dir.join(MANIFEST_FILE);
            let mut text = serde_json::to_string_pretty(&manifest)?;
            text.push('\n');
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}
