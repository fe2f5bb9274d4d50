//! Command-line runner for the qtraj scenarios.
//!
//! A run parses a strict JSON config, executes one named scenario, writes
//! its CSV tables and JSON summary, and records them with their SHA-256
//! digests in `manifest.json`. Any manifest can be fed back to `run` or
//! `verify` to reproduce the artifacts byte for byte.

pub mod config;
pub mod error;
pub mod manifest;
pub mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{parse_config, OutputFormat, Overrides, ScenarioConfig, ScenarioKind};
pub use error::CliError;
use manifest::{ArtifactEntry, Manifest, ManifestArtifacts, MANIFEST_FILE, MANIFEST_VERSION};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Runs the scenario and returns the artifacts selected by `format`, in memory.
pub fn produce(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    let out = config.params.run(config.seed)?;
    let mut artifacts = Vec::new();
    if config.format.csv() {
        artifacts.extend(out.tables.into_iter().map(|(name, text)| Artifact { name, bytes: text.into_bytes() }));
    }
    if config.format.json() {
        let mut text = serde_json::to_string_pretty(&out.summary).expect("summaries are plain JSON values");
        text.push('\n');
        artifacts.push(Artifact { name: SUMMARY_FILE.into(), bytes: text.into_bytes() });
    }
    Ok(artifacts)
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub manifest_path: PathBuf,
    pub written: Vec<(PathBuf, ArtifactEntry)>,
}

/// Runs the scenario and writes artifacts plus manifest under `config.output_dir`.
pub fn run(config: &ScenarioConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let artifacts = produce(config)?;
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for a in &artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
        written.push((path, ArtifactEntry::of(&a.name, &a.bytes)));
    }
    let manifest = Manifest {
        qtraj_manifest: MANIFEST_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config,
        threads: rayon::current_num_threads(),
        wall_time_seconds,
        artifacts: written.iter().map(|(_, e)| e.clone()).collect(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest is plain JSON");
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| CliError::io(&manifest_path, e))?;
    Ok(RunReport { manifest_path, written })
}

/// Re-runs the config stored in a manifest and compares every digest.
pub fn verify(manifest_text: &str) -> Result<Vec<ArtifactEntry>, CliError> {
    let config = parse_config(manifest_text, &Overrides::default())?;
    let recorded: ManifestArtifacts = serde_json::from_str(manifest_text)
        .map_err(|e| CliError::Config { location: format!("line {}, column {}", e.line(), e.column()), message: e.to_string() })?;
    let fresh: Vec<ArtifactEntry> = produce(&config)?.iter().map(|a| ArtifactEntry::of(&a.name, &a.bytes)).collect();
    if fresh != recorded.artifacts {
        let differing: Vec<&str> = recorded
            .artifacts
            .iter()
            .filter(|r| !fresh.contains(r))
            .map(|r| r.file.as_str())
            .chain(fresh.iter().filter(|f| !recorded.artifacts.contains(f)).map(|f| f.file.as_str()))
            .collect();
        return Err(CliError::Mismatch(differing.join(", ")));
    }
    Ok(fresh)
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
