//! Machine-readable record of one pipeline stage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

pub struct RunSummary {
    command: &'static str,
    params: Map<String, Value>,
    inputs: BTreeMap<String, InputDigest>,
    outputs: Vec<String>,
    counts: Map<String, Value>,
    timings_ms: Map<String, Value>,
    started: Instant,
}

impl RunSummary {
    pub fn new(command: &'static str, params: Map<String, Value>) -> Self {
        Self {
            command,
            params,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            counts: Map::new(),
            timings_ms: Map::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.insert(name.to_string(), digest_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn count(&mut self, key: &str, value: impl Serialize) {
        self.counts
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.timings_ms.insert(name.to_string(), json!(t.elapsed().as_secs_f64() * 1e3));
        out
    }

    /// SHA-256 over the command, resolved settings and input digests.
    pub fn config_hash(&self) -> String {
        let inputs: BTreeMap<&String, &String> = self.inputs.iter().map(|(k, v)| (k, &v.sha256)).collect();
        let canonical = json!({"command": self.command, "params": self.params, "inputs": inputs});
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }

    pub fn write(mut self, path: &Path) -> Result<()> {
        self.timings_ms
            .insert("total".into(), json!(self.started.elapsed().as_secs_f64() * 1e3));
        let doc = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.config_hash(),
            "params": self.params,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "counts": self.counts,
            "timings_ms": self.timings_ms,
        });
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
    }
}

/// `dist.json` → `dist.run.json`; `manifest.jsonl` → `manifest.run.json`.
pub fn beside(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.run.json"))
}

pub fn inside(dir: &Path) -> PathBuf {
    dir.join("run_summary.json")
}
