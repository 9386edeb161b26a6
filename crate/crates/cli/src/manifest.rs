use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance block embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: String, config: &serde_json::Value, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config_digest: config_digest(config, seed),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    /// `# key: value` lines for the head of a CSV file.
    pub fn comment_block(&self) -> String {
        format!(
            "# tool_version: {}\n# command: {}\n# config_digest: {}\n# seed: {}\n# timestamp: {}\n",
            self.tool_version, self.command, self.config_digest, self.seed, self.timestamp
        )
    }
}

pub fn config_digest(config: &serde_json::Value, seed: u64) -> String {
    let canonical = serde_json::json!({ "config": config, "seed": seed });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_depends_on_config_and_seed_only() {
        let cfg = serde_json::json!({ "trials": 100 });
        assert_eq!(config_digest(&cfg, 1), config_digest(&cfg, 1));
        assert_ne!(config_digest(&cfg, 1), config_digest(&cfg, 2));
        assert_ne!(config_digest(&cfg, 1), config_digest(&serde_json::json!({ "trials": 101 }), 1));
        assert_eq!(config_digest(&cfg, 1).len(), 64);
    }
}
