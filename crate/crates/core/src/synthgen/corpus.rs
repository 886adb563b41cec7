// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::recipe::{generate, Archetype, RecipeError, VARIANTS};
use super::{CorpusManifest, ManifestEntry, StateEncoding};
use crate::netlist::{emit_json_netlist, CellLibrary, Netlist, RegisterClass};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("a corpus needs at least two archetypes, got {0}")]
    TooFewArchetypes(usize),
    #[error("output path collision: {0}")]
    PathCollision(String),
    #[error("{design}: {source}")]
    Recipe { design: String, source: RecipeError },
    #[error("i/o on {path}: {message}")]
    Io { path: String, message: String },
}

/// A generated graph with its manifest entry.
pub struct CorpusItem {
    pub entry: ManifestEntry,
    pub netlist: Netlist,
}

fn config_hash(archetypes: &[Archetype], seed: u64, lib: &CellLibrary) -> String {
    let cfg = serde_json::json!({
        "archetypes": archetypes,
        "seed": seed,
        "library": lib.fingerprint(),
    });
    hex::encode(Sha256::digest(cfg.to_string().as_bytes()))
}

/// Every archetype in four variants and both encodings, in archetype,
/// encoding, variant order.
pub fn generate_corpus(
    archetypes: &[Archetype],
    seed: u64,
    lib: &Arc<CellLibrary>,
) -> Result<(CorpusManifest, Vec<CorpusItem>), CorpusError> {
    if archetypes.len() < 2 {
        return Err(CorpusError::TooFewArchetypes(archetypes.len()));
    }
    let mut paths = BTreeSet::new();
    for a in archetypes {
        for enc in [StateEncoding::OneHot, StateEncoding::Binary] {
            for v in VARIANTS {
                let p = entry_path(&a.name, v, enc);
                if !paths.insert(p.clone()) {
                    return Err(CorpusError::PathCollision(p));
                }
            }
        }
    }
    let per_design: Vec<Result<Vec<CorpusItem>, CorpusError>> = archetypes
        .par_iter()
        .map(|a| {
            let mut out = Vec::with_capacity(8);
            for enc in [StateEncoding::OneHot, StateEncoding::Binary] {
                for v in VARIANTS {
                    let recipe = a.recipe(seed, v, enc);
                    let (netlist, labels) = generate(&recipe, lib)
                        .map_err(|source| CorpusError::Recipe { design: a.name.clone(), source })?;
                    out.push(CorpusItem {
                        entry: ManifestEntry {
                            design: a.name.clone(),
                            variant: v,
                            encoding: enc,
                            path: entry_path(&a.name, v, enc),
                            n_registers: labels.len(),
                            n_state_registers: labels.count(RegisterClass::State),
                        },
                        netlist,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut items = Vec::new();
    for r in per_design {
        items.extend(r?);
    }
    let manifest = CorpusManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config_hash: config_hash(archetypes, seed, lib),
        entries: items.iter().map(|i| i.entry.clone()).collect(),
    };
    Ok((manifest, items))
}

fn entry_path(design: &str, variant: u8, enc: StateEncoding) -> String {
    format!("{design}_v{variant}_{}.json", enc.as_str())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    std::fs::write(path, bytes)
        .map_err(|e| CorpusError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Writes every netlist as JSON plus `manifest.json` into `out`.
pub fn build_corpus(
    archetypes: &[Archetype],
    seed: u64,
    lib: &Arc<CellLibrary>,
    out: &Path,
) -> Result<CorpusManifest, CorpusError> {
    let (manifest, items) = generate_corpus(archetypes, seed, lib)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CorpusError::Io { path: out.display().to_string(), message: e.to_string() })?;
    for item in &items {
        write(&out.join(&item.entry.path), emit_json_netlist(&item.netlist).as_bytes())?;
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&out.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}
