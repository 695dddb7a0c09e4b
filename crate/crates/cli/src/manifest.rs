//! Run manifests written next to every output.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use serde::Serialize;

/// What a command produced and how to reproduce it.
pub struct RunRecord {
    /// Primary output; the manifest goes to `<primary>.manifest.json`.
    pub primary: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

impl RunRecord {
    pub fn new(primary: &Path, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(RunRecord {
            primary: primary.to_path_buf(),
            outputs: vec![primary.to_path_buf()],
            seed: None,
            config: serde_json::to_value(config)?,
        })
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn output(mut self, path: PathBuf) -> Self {
        self.outputs.push(path);
        self
    }
}

#[derive(Serialize)]
struct Versions {
    graphmean: &'static str,
    cli: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a serde_json::Value,
    seed: Option<u64>,
    versions: Versions,
    threads: usize,
    outputs: Vec<String>,
    wall_time_seconds: f64,
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

pub fn write(command: &str, record: RunRecord, elapsed: Duration) -> anyhow::Result<()> {
    let manifest = Manifest {
        command,
        config: &record.config,
        seed: record.seed,
        versions: Versions { graphmean: graphmean::VERSION, cli: env!("CARGO_PKG_VERSION") },
        threads: rayon::current_num_threads(),
        outputs: record.outputs.iter().map(|p| p.display().to_string()).collect(),
        wall_time_seconds: elapsed.as_secs_f64(),
    };
    let path = manifest_path(&record.primary);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    graphmean::io::write_text(&path, &text).with_context(|| format!("writing manifest {}", path.display()))
}
