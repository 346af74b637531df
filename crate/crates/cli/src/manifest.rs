//! Run manifest: a JSON record of what a command produced and from what.

use pwc_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of the resolved run configuration (TOML text).
    pub config_fingerprint: String,
    /// SHA-256 of the input dataset file, when one was read.
    pub data_fingerprint: Option<String>,
    pub seed: u64,
    pub created: String,
    /// Association model label, when the command fitted one.
    pub model: Option<String>,
    /// Every file the command wrote, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_text: &str, seed: u64) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_fingerprint: sha256_hex(config_text.as_bytes()),
            data_fingerprint: None,
            seed,
            created: timestamp(),
            model: None,
            outputs: Vec::new(),
        }
    }

    pub fn with_data_file(mut self, path: &Path) -> Result<RunManifest> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        self.data_fingerprint = Some(sha256_hex(&bytes));
        Ok(self)
    }

    pub fn record(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(&mut self, out_dir: &Path) -> Result<()> {
        if !self.outputs.contains(&MANIFEST_NAME.to_string()) {
            self.outputs.push(MANIFEST_NAME.to_string());
        }
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        std::fs::write(out_dir.join(MANIFEST_NAME), text + "\n")?;
        Ok(())
    }

    pub fn load(out_dir: &Path) -> Result<RunManifest> {
        let path = out_dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("bad manifest: {e}")))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn timestamp() -> String {
    // Seconds since the epoch; avoids a date-time dependency and never
    // affects CSV reproducibility because it only lives in the manifest.
    match std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH) {
        Ok(d) => format!("{}", d.as_secs()),
        Err(_) => "0".to_string(),
    }
}
