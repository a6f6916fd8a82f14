use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use chanorder_core::checkpoint::write_atomic;

use crate::Command;

/// Everything needed to repeat a run: the parsed command, the fully resolved
/// config it ran with, and the thread count (results are bit-identical for a
/// fixed count).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub config: Option<serde_json::Value>,
    pub seed: Option<u64>,
    pub checkpoint: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub threads: usize,
    pub sequential: bool,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
    pub status: String,
    pub tool_version: String,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

impl RunManifest {
    pub fn start(command: &Command, threads: usize, sequential: bool) -> Self {
        RunManifest {
            command: command.clone(),
            config: None,
            seed: None,
            checkpoint: None,
            corpus: None,
            threads,
            sequential,
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
            status: "running".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_atomic(path, json.as_bytes())?;
        Ok(())
    }

    /// Records the outcome and rewrites the file.
    pub fn finish(&mut self, path: &Path, outcome: &anyhow::Result<()>) -> anyhow::Result<()> {
        self.finished_unix_ms = Some(now_ms());
        self.status = match outcome {
            Ok(()) => "ok".into(),
            Err(e) => format!("failed: {e:#}"),
        };
        self.write(path)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| crate::usage(format!("{}: not a run manifest: {e}", path.display())))
    }
}
