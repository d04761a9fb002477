use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use eegnn::config::KeyValues;
use eegnn::{Error, Result};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Written as `manifest.json` next to every command's outputs. Outputs are
/// listed relative to the output directory so that repeated runs produce
/// identical manifests apart from `wall_secs`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub code_version: &'static str,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_secs: f64,
    /// Command-specific extras (e.g. aborted seeds).
    pub notes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &KeyValues, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config: config
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            seed,
            code_version: env!("CARGO_PKG_VERSION"),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_secs: 0.0,
            notes: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest(path, path.display().to_string())?);
        Ok(())
    }

    pub fn add_output(&mut self, out_dir: &Path, rel: &str) -> Result<()> {
        self.outputs
            .push(digest(&out_dir.join(rel), rel.to_string())?);
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        eegnn::io::write_string(&out_dir.join("manifest.json"), &(text + "\n"))
    }
}

fn digest(path: &Path, label: String) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(FileDigest {
        path: label,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}
