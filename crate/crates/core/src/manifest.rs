//! Run manifests: what was run, with which inputs, and how to verify them.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fleet::{Engine, RNG_ALGORITHM};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario_id: String,
    pub engine: Engine,
    pub seed: u64,
    /// SHA-256 over every input, see [`digest_inputs`].
    pub config_digest: String,
    pub inputs: Vec<InputDigest>,
    pub tool_version: String,
    pub rng_algorithm: String,
    /// RFC 3339 UTC.
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_config: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new(scenario_id: impl Into<String>, engine: Engine, seed: u64, inputs: &[(String, Vec<u8>)]) -> Self {
        let (config_digest, digests) = digest_inputs(inputs);
        Self {
            scenario_id: scenario_id.into(),
            engine,
            seed,
            config_digest,
            inputs: digests,
            tool_version: TOOL_VERSION.to_string(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            notes: Vec::new(),
            resolved_config: None,
        }
    }

    /// True when `inputs` hash to the recorded digest.
    pub fn verify(&self, inputs: &[(String, Vec<u8>)]) -> bool {
        digest_inputs(inputs).0 == self.config_digest
    }
}

/// Per-file SHA-256 plus a combined digest over the sorted `(name, hash)` list.
pub fn digest_inputs(inputs: &[(String, Vec<u8>)]) -> (String, Vec<InputDigest>) {
    let mut digests: Vec<InputDigest> = inputs
        .iter()
        .map(|(name, bytes)| InputDigest {
            name: name.clone(),
            sha256: hex::encode(Sha256::digest(bytes)),
        })
        .collect();
    digests.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.sha256.cmp(&b.sha256)));
    let mut h = Sha256::new();
    for d in &digests {
        h.update(d.name.as_bytes());
        h.update([0]);
        h.update(d.sha256.as_bytes());
        h.update([b'\n']);
    }
    (hex::encode(h.finalize()), digests)
}
