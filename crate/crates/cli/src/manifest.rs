use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;

/// Provenance record written next to every output table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of [`Config::canonical`].
    pub config_digest: String,
    pub versions: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_time_ms: u64,
}

pub fn config_digest(config: &Config) -> String {
    format!("{:x}", Sha256::digest(config.canonical().as_bytes()))
}

pub fn versions() -> String {
    format!(
        "scalekernel-cli {} (scalekernel {})",
        env!("CARGO_PKG_VERSION"),
        scalekernel::VERSION
    )
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest fields always serialize")
    }
}
