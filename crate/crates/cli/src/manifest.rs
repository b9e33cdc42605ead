//! Provenance sidecar emitted next to every batch-embedding output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nexttdnn::config::ModelConfig;
use nexttdnn::error::{Error, Result};
use nexttdnn::features::MelConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// SHA-256 of the canonical config rendering.
    pub config_hash: String,
    /// SHA-256 of the checkpoint file bytes.
    pub checkpoint_hash: String,
    pub feature_config: MelConfig,
    pub seed: Option<u64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn for_embed_run(
        config: &ModelConfig,
        checkpoint_bytes: &[u8],
        feature_config: &MelConfig,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(config.to_toml_string().as_bytes()),
            checkpoint_hash: sha256_hex(checkpoint_bytes),
            feature_config: feature_config.clone(),
            seed: None,
        }
    }

    /// Path of the sidecar for a given output file.
    pub fn sidecar_path(out: &Path) -> PathBuf {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            what: "manifest",
            detail: e.to_string(),
        })?;
        std::fs::write(Self::sidecar_path(out), text)?;
        Ok(())
    }
}
