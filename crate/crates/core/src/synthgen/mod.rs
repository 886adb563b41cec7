// SPDX-License-Identifier: Apache-2.0

//! Synthetic labeled netlists: a control FSM driving datapath blocks.

mod blocks;
mod builder;
mod corpus;
mod fsm;
mod manifest;
mod recipe;

pub use blocks::{Block, Ctx, StageLogic};
pub use builder::{Builder, Style};
pub use corpus::{build_corpus, generate_corpus, CorpusError, CorpusItem, MANIFEST_FILE};
pub use fsm::{cover, synthesize, Cube, FsmNets, FsmSpec, MachineType};
pub use manifest::{CorpusManifest, ManifestEntry, StateEncoding};
pub use recipe::{builtin_archetypes, generate, variant_style, Archetype, DesignRecipe, RecipeError, VARIANTS};
