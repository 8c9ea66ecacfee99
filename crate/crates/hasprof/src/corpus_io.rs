//! Simulated corpora on disk: one packet CSV and one label file per trace
//! plus a `manifest.json` listing them with their seeds.

use std::path::Path;

use hasprof_core::sim::{simulate_spec, CorpusConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::trace_io::write_trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub traces: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub trace_id: String,
    pub scenario: String,
    pub seed: u64,
    pub packets: String,
    pub labels: String,
    pub n_packets: usize,
}

/// Simulates every trace of `cfg` into `dir` and writes the manifest.
pub fn write_corpus(cfg: &CorpusConfig, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut traces = Vec::new();
    for spec in cfg.specs() {
        let trace = simulate_spec(&spec, cfg.seed)?;
        write_trace(dir, &trace)?;
        let id = trace.meta.trace_id.clone();
        traces.push(ManifestEntry {
            scenario: spec.scenario().to_string(),
            seed: spec.seed(cfg.seed),
            packets: format!("{id}.csv"),
            labels: format!("{id}.labels"),
            n_packets: trace.packets.len(),
            trace_id: id,
        });
    }
    let manifest = Manifest { seed: cfg.seed, traces };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path, line: e.line(), msg: e.to_string() })
}
