use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

/// Record of one command invocation, written last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Configuration after defaults and command-line overrides.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// Artifacts relative to the output directory.
    pub outputs: Vec<PathBuf>,
    /// Wall-clock duration of the run, s.
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>, out: &Path, outputs: &[PathBuf], elapsed: Duration) -> Result<Self> {
        let mut rel = Vec::with_capacity(outputs.len());
        for p in outputs {
            let r = p
                .strip_prefix(out)
                .with_context(|| format!("{} is outside the output directory {}", p.display(), out.display()))?;
            if !p.is_file() {
                bail!("artifact {} was not written", p.display());
            }
            rel.push(r.to_path_buf());
        }
        rel.sort();
        rel.dedup();
        Ok(RunManifest {
            command: command.into(),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            outputs: rel,
            wall_clock_s: elapsed.as_secs_f64(),
        })
    }

    /// Writes `run_manifest.json` through a temporary file in the same
    /// directory and an atomic rename.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = out.join(RUN_MANIFEST_FILE);
        let mut tmp = tempfile::NamedTempFile::new_in(out).with_context(|| format!("cannot create a file in {}", out.display()))?;
        tmp.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
