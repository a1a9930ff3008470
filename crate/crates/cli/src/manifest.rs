use graspdec_core::preprocess::IirFilter;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "graspdec";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A file by name (never an absolute path) and digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(name: &str, bytes: &[u8]) -> Self {
        Self { name: name.to_string(), sha256: sha256_hex(bytes) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFilter {
    pub name: String,
    pub filter: IirFilter,
}

/// Everything needed to rerun a command: the resolved configuration is
/// stored in full, so defaults changing later does not change a replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub filter_designs: Vec<NamedFilter>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new<C: Serialize>(
        command: &str,
        seed: Option<u64>,
        config: &C,
        filter_designs: Vec<NamedFilter>,
        inputs: Vec<FileDigest>,
        outputs: &[(String, Vec<u8>)],
    ) -> Self {
        let mut outputs: Vec<FileDigest> = outputs.iter().map(|(n, b)| FileDigest::of(n, b)).collect();
        outputs.sort_by(|a, b| a.name.cmp(&b.name));
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config).expect("serialisable config"),
            filter_designs,
            inputs,
            outputs,
        }
    }
}
