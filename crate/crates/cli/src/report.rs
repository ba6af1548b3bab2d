//! Plot-data bundle and run manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::config::{MessageSource, ScenarioConfig};
use crate::error::{config, io, CliError, Result};
use crate::pipeline::{load_metrics, Layout, STAGE_DESIGN, STAGE_EVALUATE};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub masks: u64,
    pub noise: u64,
    pub jitter: u64,
    pub coherence: u64,
    /// Synthetic message seeds in user order; file messages are omitted.
    pub messages: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub driving_gain: f64,
    pub seeds: Seeds,
    pub config: ScenarioConfig,
    /// SHA-256 of every artifact, keyed by path relative to the output directory.
    pub checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config(e.to_string()))
    }
}

fn seeds(cfg: &ScenarioConfig) -> Seeds {
    Seeds {
        masks: cfg.masks.seed,
        noise: cfg.design.noise_seed,
        jitter: cfg.evaluation.jitter_seed,
        coherence: cfg.evaluation.coherence_seed,
        messages: cfg
            .messages
            .iter()
            .filter_map(|m| match m {
                MessageSource::Synth { synth } => Some(*synth),
                MessageSource::File { .. } => None,
            })
            .collect(),
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Checksums of all files under `root`, skipping the manifest itself.
pub fn checksum_tree(root: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walk stays under root");
        let key = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if key == format!("report/{MANIFEST_FILE}") {
            continue;
        }
        out.insert(key, sha256_file(entry.path())?);
    }
    Ok(out)
}

/// Files copied into the bundle: (stage, source relative to the output
/// directory, name inside the bundle).
const BUNDLE: &[(&str, &str, &str)] = &[
    (STAGE_EVALUATE, "evaluate/coherence.csv", "coherence.csv"),
    (STAGE_EVALUATE, "evaluate/autocorr.csv", "autocorr.csv"),
    (STAGE_DESIGN, "design/residual.csv", "residual.csv"),
    (
        STAGE_DESIGN,
        "design/solve_report.toml",
        "solve_report.toml",
    ),
    (STAGE_EVALUATE, "evaluate/stoi.csv", "stoi.csv"),
    (STAGE_EVALUATE, "evaluate/summary.csv", "summary.csv"),
    (STAGE_EVALUATE, "evaluate/metrics.toml", "metrics.toml"),
];

pub fn report(cfg: &ScenarioConfig, out: &Layout) -> Result<RunManifest> {
    for (stage, src, _) in BUNDLE {
        let p = out.root.join(src);
        if !p.is_file() {
            return Err(CliError::MissingArtifact { stage, path: p });
        }
    }
    let metrics = load_metrics(out)?;
    let dir = out.report();
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    for (_, src, name) in BUNDLE {
        let from = out.root.join(src);
        let to = dir.join(name);
        std::fs::copy(&from, &to).map_err(io(&to))?;
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        driving_gain: metrics.driving_gain,
        seeds: seeds(cfg),
        config: cfg.clone(),
        checksums: checksum_tree(&out.root)?,
    };
    let text = toml::to_string(&manifest).map_err(|e| config(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(io(&path))?;
    eprintln!(
        "[report] bundle with {} checksummed artifacts in {}",
        manifest.checksums.len(),
        dir.display()
    );
    Ok(manifest)
}
