use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// Provenance record embedded in JSON reports or written beside CSV outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub inputs: Vec<PathBuf>,
    pub config: Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_time_s: f64,
}

pub struct Clock {
    start: Instant,
    command: &'static str,
}

impl Clock {
    pub fn start(command: &'static str) -> Self {
        Clock {
            start: Instant::now(),
            command,
        }
    }

    pub fn manifest(&self, inputs: Vec<PathBuf>, config: Value, seed: Option<u64>) -> RunManifest {
        RunManifest {
            command: self.command,
            inputs,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// `out.csv` becomes `out.csv.manifest.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
