use std::path::Path;

use hadamard_core::ScenarioOutcome;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Done,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowStatus {
    pub eps: f64,
    pub status: Status,
    pub seconds: f64,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub exit_code: Option<u8>,
    #[serde(default)]
    pub outcome: Option<ScenarioOutcome>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub constants_hash: String,
    pub c0: f64,
    pub c1: f64,
    pub seed: u64,
    pub started: String,
    pub wall_clock_s: f64,
    pub rows: Vec<RowStatus>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Option<RunManifest> {
        let text = std::fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Written to a sibling file and renamed, so an interrupted run never leaves half a manifest.
    pub fn save(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Failure::io("manifest", e))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| Failure::io(&tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, path).map_err(|e| Failure::io(&path.display().to_string(), e))
    }

    /// Same inputs, so finished rows can be reused.
    pub fn matches(&self, config_hash: &str, constants_hash: &str, eps: &[f64]) -> bool {
        self.config_hash == config_hash
            && self.constants_hash == constants_hash
            && self.rows.len() == eps.len()
            && self.rows.iter().zip(eps).all(|(r, e)| r.eps == *e)
    }
}
