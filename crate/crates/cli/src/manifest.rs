//! Run manifest: the command, every effective decision value, and a digest
//! of every input file that took part. Deterministic — no timestamps.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages::{OutputTracker, MANIFEST_FILE};

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    config: BTreeMap<String, String>,
    inputs: BTreeMap<String, InputDigest>,
}

pub fn write_manifest(
    command: &str,
    config: &PipelineConfig,
    tracker: &mut OutputTracker,
) -> Result<(), CliError> {
    let mut inputs = BTreeMap::new();
    let sources: [(&str, &Option<PathBuf>); 5] = [
        ("embeddings", &config.embeddings),
        ("companies", &config.companies),
        ("technologies", &config.technologies),
        ("patents", &config.patents),
        ("anchors", &config.anchors),
    ];
    for (name, path) in sources {
        if let Some(path) = path {
            if path.exists() {
                let bytes = std::fs::read(path).map_err(|e| {
                    CliError::input(format!("cannot digest {}: {e}", path.display()))
                })?;
                let digest = Sha256::digest(&bytes);
                inputs.insert(
                    name.to_string(),
                    InputDigest {
                        path: path.display().to_string(),
                        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
                    },
                );
            }
        }
    }

    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.decision_map(),
        inputs,
    };
    let bytes = serde_json::to_vec_pretty(&manifest)?;
    tracker.write(&config.out_dir.join(MANIFEST_FILE), &bytes)?;
    Ok(())
}
