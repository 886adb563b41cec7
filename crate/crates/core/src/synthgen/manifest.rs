// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateEncoding {
    OneHot,
    Binary,
}

impl StateEncoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::OneHot => "one_hot",
            Self::Binary => "binary",
        }
    }

    /// Number of state bits for `states` states.
    pub fn state_bits(self, states: usize) -> usize {
        match self {
            Self::OneHot => states,
            Self::Binary => (usize::BITS - (states.max(2) - 1).leading_zeros()) as usize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub design: String,
    pub variant: u8,
    pub encoding: StateEncoding,
    /// Relative to the manifest's directory.
    pub path: String,
    pub n_registers: usize,
    pub n_state_registers: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn designs(&self) -> Vec<&str> {
        let mut d: Vec<&str> = self.entries.iter().map(|e| e.design.as_str()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Entries of one encoding, in manifest order.
    pub fn with_encoding(&self, encoding: StateEncoding) -> Vec<ManifestEntry> {
        self.entries.iter().filter(|e| e.encoding == encoding).cloned().collect()
    }

    pub fn resolve(&self, manifest_path: &Path, entry: &ManifestEntry) -> std::path::PathBuf {
        manifest_path.parent().unwrap_or(Path::new(".")).join(&entry.path)
    }
}
