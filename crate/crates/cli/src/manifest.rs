//! Run manifest: everything needed to reproduce a run's artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use iwakf_core::sim::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Fully resolved config; passing this file back as `--config`
    /// reproduces the run.
    pub config: ExperimentConfig,
    /// SHA-256 of every artifact, keyed by file name.
    pub checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
            checksums: BTreeMap::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_round_trips_through_toml() {
        let mut m = RunManifest::new(&ExperimentConfig::default());
        m.checksums.insert("metrics.csv".into(), sha256_hex(b""));
        let text = toml::to_string(&m).unwrap();
        let back: RunManifest = toml::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
