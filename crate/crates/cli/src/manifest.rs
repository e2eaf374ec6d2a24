use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the resolved configuration in compact JSON.
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub version: &'static str,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

/// Seconds since the epoch, pinned by `SOURCE_DATE_EPOCH` when set so that
/// repeated runs produce identical manifests.
pub fn now_unix() -> u64 {
    if let Some(pinned) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return pinned;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn digest<T: Serialize>(resolved: &T) -> String {
    let json = serde_json::to_string(resolved).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl RunManifest {
    pub fn new<T: Serialize>(command: &str, resolved: &T, seeds: Vec<u64>, started_unix: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config_digest: digest(resolved),
            seeds,
            version: env!("CARGO_PKG_VERSION"),
            started_unix,
            finished_unix: started_unix,
            outputs: Vec::new(),
        }
    }
}
