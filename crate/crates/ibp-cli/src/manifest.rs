//! Run manifests: every file-producing command writes a JSON sidecar with
//! the resolved parameters and content digests of its outputs, so a run can
//! be reproduced and its artifacts verified byte for byte.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub struct ManifestBuilder {
    command_line: Vec<String>,
    resolved: Value,
    seed: Option<u64>,
    outputs: Vec<Value>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(resolved: Value, seed: Option<u64>) -> Self {
        ManifestBuilder {
            command_line: std::env::args().collect(),
            resolved,
            seed,
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Writes `content` to `path` and records its digest.
    pub fn write_output(&mut self, path: &Path, content: &str) -> Result<()> {
        std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?;
        let digest = Sha256::digest(content.as_bytes());
        self.outputs.push(json!({
            "path": path.display().to_string(),
            "sha256": format!("{digest:x}"),
            "bytes": content.len(),
        }));
        Ok(())
    }

    /// Writes the manifest next to the primary output as `<out>.manifest.json`.
    pub fn finish(self, primary_out: &Path) -> Result<()> {
        let manifest = json!({
            "command_line": self.command_line,
            "resolved": self.resolved,
            "seed": self.seed,
            "engine_versions": { "ibp-core": env!("CARGO_PKG_VERSION") },
            "outputs": self.outputs,
            "wall_ms": self.started.elapsed().as_millis() as u64,
        });
        let path = manifest_path(primary_out);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

pub fn manifest_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
