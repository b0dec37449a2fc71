//! `manifest.json`: what was run, with which seed, and what it wrote.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{CliResult, Failure};

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    /// Arguments after the program name, with the seed and output directory
    /// made explicit; `mrca rerun` replays them.
    pub argv: Vec<String>,
    pub versions: Value,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    /// File names inside the output directory.
    pub outputs: Vec<String>,
    pub summary: Value,
}

impl Manifest {
    pub fn new(
        command: &str,
        config: Value,
        seed: u64,
        argv: Vec<String>,
        started: Instant,
        files: &[PathBuf],
        summary: Value,
    ) -> Self {
        let elapsed = started.elapsed();
        let started_unix = SystemTime::now()
            .checked_sub(elapsed)
            .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
            .map_or(0, |d| d.as_secs());
        Manifest {
            command: command.into(),
            config,
            seed,
            argv,
            versions: serde_json::json!({
                "mrca": env!("CARGO_PKG_VERSION"),
                "manifest_schema": 1,
            }),
            started_unix,
            wall_clock_seconds: elapsed.as_secs_f64(),
            outputs: files
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect(),
            summary,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }
}
