//! Input hashing, atomic output and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Entry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Map<String, Value>,
    config_sha256: String,
    inputs: &'a [Entry],
    outputs: Vec<Entry>,
}

/// Everything one subcommand reads and writes. Outputs are held in memory
/// and only reach the output directory once the command has succeeded.
pub struct Run {
    command: &'static str,
    out: PathBuf,
    config: Map<String, Value>,
    inputs: Vec<Entry>,
    files: Vec<(String, Vec<u8>)>,
}

impl Run {
    pub fn new(command: &'static str, out: PathBuf) -> Self {
        Run { command, out, config: Map::new(), inputs: Vec::new(), files: Vec::new() }
    }

    /// Records resolved settings for the manifest.
    pub fn record(&mut self, group: &impl Serialize) {
        if let Ok(Value::Object(m)) = serde_json::to_value(group) {
            self.config.extend(m);
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.config.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    /// Hashes an input file. Missing files are data errors naming the path.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(Entry { path: path.display().to_string(), sha256: sha256(&bytes) });
        Ok(())
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn add_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    /// Writes every output and then the manifest, each through a temporary
    /// file renamed into place. Returns the written paths.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let outputs: Vec<Entry> =
            self.files.iter().map(|(name, bytes)| Entry { path: name.clone(), sha256: sha256(bytes) }).collect();
        let config_text = serde_json::to_string(&self.config)?;
        let manifest = Manifest {
            tool: "exea",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: &self.config,
            config_sha256: sha256(config_text.as_bytes()),
            inputs: &self.inputs,
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        self.files.push(("manifest.json".to_string(), text.into_bytes()));

        let mut staged = Vec::new();
        for (name, bytes) in &self.files {
            let dest = self.out.join(name);
            let dir = dest.parent().unwrap_or(&self.out).to_path_buf();
            fs::create_dir_all(&dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))?;
            let mut tmp = tempfile::NamedTempFile::new_in(&dir)
                .with_context(|| format!("cannot stage output in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, dest));
        }
        let mut written = Vec::new();
        for (tmp, dest) in staged {
            tmp.persist(&dest).with_context(|| format!("cannot write {}", dest.display()))?;
            written.push(dest);
        }
        Ok(written)
    }
}
