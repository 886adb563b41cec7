// SPDX-License-Identifier: Apache-2.0

//! Design recipes: one control FSM plus datapath blocks, and the built-in
//! archetypes.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::blocks::{Block, Ctx, StageLogic};
use super::builder::{Builder, Style};
use super::fsm::{synthesize, FsmSpec, MachineType};
use super::StateEncoding;
use crate::netlist::{CellLibrary, Netlist, NetlistError, RegisterLabels};

pub const VARIANTS: [u8; 4] = [1, 2, 3, 4];

#[derive(Debug, Error, PartialEq)]
pub enum RecipeError {
    #[error("variant {0} is not in 1..=4")]
    Variant(u8),
    #[error("invalid recipe: {0}")]
    Invalid(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRecipe {
    pub design: String,
    pub fsm: FsmSpec,
    pub blocks: Vec<Block>,
    /// Datapath word width before the variant adjustment.
    pub width: usize,
    pub seed: u64,
    pub variant: u8,
}

/// Gate style and word width of a structural variant.
pub fn variant_style(variant: u8, width: usize) -> Result<(Style, usize), RecipeError> {
    Ok(match variant {
        1 => (Style { wide_gates: false, max_fanout: None }, width),
        2 => (Style { wide_gates: true, max_fanout: None }, width),
        3 => (Style { wide_gates: false, max_fanout: Some(4) }, width + 1),
        4 => (Style { wide_gates: true, max_fanout: Some(6) }, width.saturating_sub(1).max(2)),
        v => return Err(RecipeError::Variant(v)),
    })
}

impl DesignRecipe {
    pub fn validate(&self) -> Result<(), RecipeError> {
        self.fsm.validate().map_err(RecipeError::Invalid)?;
        if self.fsm.outputs == 0 {
            return Err(RecipeError::Invalid("FSM drives no control signals".into()));
        }
        if self.width < 2 {
            return Err(RecipeError::Invalid("width must be at least 2".into()));
        }
        for b in &self.blocks {
            let ok = match *b {
                Block::Pipeline { stages, .. } | Block::Synchronizer { stages } => stages >= 1,
                Block::Counter { width } => width >= 1,
                Block::FreeCounter { modulus } => modulus >= 2,
                Block::Mixer { words, .. } => words >= 1,
                Block::RegisterFile { words } => words >= 2 && words.is_power_of_two(),
                Block::LoadReg | Block::ShiftReg | Block::Accumulator => true,
            };
            if !ok {
                return Err(RecipeError::Invalid(format!("bad block parameters: {b:?}")));
            }
        }
        variant_style(self.variant, self.width).map(|_| ())
    }

    /// Name of the generated netlist.
    pub fn netlist_name(&self) -> String {
        format!("{}_v{}_{}", self.design, self.variant, self.fsm.encoding.as_str())
    }
}

/// Builds the design. FSM state bits are the only state-labeled registers.
pub fn generate(recipe: &DesignRecipe, lib: &Arc<CellLibrary>) -> Result<(Netlist, RegisterLabels), RecipeError> {
    recipe.validate()?;
    let (style, width) = variant_style(recipe.variant, recipe.width)?;
    let mut b = Builder::new(lib.clone(), style)?;
    let rst = b.input();
    let fsm_inputs: Vec<_> = (0..recipe.fsm.inputs).map(|_| b.future()).collect();
    let nets = synthesize(&mut b, &recipe.fsm, &fsm_inputs, rst);
    let mut ctx = Ctx::new(b, rst, nets.outputs, ChaCha8Rng::seed_from_u64(recipe.seed));
    for &block in &recipe.blocks {
        ctx.build(block, width);
    }
    // status signals feed the FSM; primary inputs make up any shortfall
    let status = std::mem::take(&mut ctx.status);
    for (i, &f) in fsm_inputs.iter().enumerate() {
        let src = match status.get(i) {
            Some(&s) => s,
            None => ctx.b.input(),
        };
        ctx.b.bind(f, src);
    }
    let n = ctx.b.finish(&recipe.netlist_name())?;
    let labels = n.labels().cloned().expect("builder always labels");
    Ok((n, labels))
}

/// A named design template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    pub states: usize,
    pub fsm_inputs: usize,
    pub fsm_outputs: usize,
    pub machine: MachineType,
    pub width: usize,
    pub blocks: Vec<Block>,
}

fn derive_seed(seed: u64, design: &str) -> u64 {
    let h = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(design.as_bytes()).finalize();
    u64::from_le_bytes(h[..8].try_into().expect("digest is 32 bytes"))
}

impl Archetype {
    /// The recipe for one variant and encoding. The FSM and block wiring
    /// depend only on `(seed, name)`, so variants and encodings of one
    /// design share them.
    pub fn recipe(&self, seed: u64, variant: u8, encoding: StateEncoding) -> DesignRecipe {
        let design_seed = derive_seed(seed, &self.name);
        let mut rng = ChaCha8Rng::seed_from_u64(design_seed);
        let fsm = FsmSpec::random(self.states, self.fsm_inputs, self.fsm_outputs, self.machine, encoding, &mut rng);
        DesignRecipe {
            design: self.name.clone(),
            fsm,
            blocks: self.blocks.clone(),
            width: self.width,
            seed: design_seed,
            variant,
        }
    }
}

fn arch(name: &str, states: usize, machine: MachineType, width: usize, blocks: Vec<Block>) -> Archetype {
    Archetype {
        name: name.into(),
        states,
        fsm_inputs: 2,
        fsm_outputs: 4,
        machine,
        width,
        blocks,
    }
}

/// The ten built-in archetypes. `uart_like` carries a free-running counter.
pub fn builtin_archetypes() -> Vec<Archetype> {
    use Block::*;
    use MachineType::{Mealy, Moore};
    use StageLogic as L;
    vec![
        arch("aes_like", 6, Moore, 5, vec![
            Mixer { words: 4, adder: false }, LoadReg, Counter { width: 4 }, Pipeline { stages: 2, logic: L::Xor },
        ]),
        arch("siphash_like", 7, Mealy, 5, vec![
            Mixer { words: 4, adder: true }, Counter { width: 3 }, Pipeline { stages: 1, logic: L::None },
        ]),
        arch("sha1_like", 5, Moore, 5, vec![
            ShiftReg, ShiftReg, Accumulator, Counter { width: 5 }, Pipeline { stages: 1, logic: L::None },
        ]),
        arch("fsm_like", 10, Mealy, 4, vec![LoadReg, LoadReg, Pipeline { stages: 2, logic: L::And }]),
        arch("gpio_like", 4, Moore, 5, vec![
            Synchronizer { stages: 2 }, LoadReg, LoadReg, LoadReg, Pipeline { stages: 1, logic: L::None },
        ]),
        arch("memory_like", 5, Moore, 4, vec![
            RegisterFile { words: 4 }, LoadReg, Pipeline { stages: 1, logic: L::None },
        ]),
        arch("uart_like", 8, Mealy, 5, vec![
            FreeCounter { modulus: 12 }, Counter { width: 3 }, ShiftReg, ShiftReg, Synchronizer { stages: 2 },
        ]),
        arch("cr_div_like", 4, Moore, 4, vec![
            Counter { width: 6 }, Counter { width: 4 }, Pipeline { stages: 2, logic: L::Xor },
        ]),
        arch("altor32_like", 9, Moore, 4, vec![
            RegisterFile { words: 4 }, Accumulator, Counter { width: 5 }, LoadReg, Pipeline { stages: 1, logic: L::Xor },
        ]),
        arch("gcm_aes_like", 7, Mealy, 5, vec![
            Mixer { words: 4, adder: false }, Accumulator, Counter { width: 4 }, Pipeline { stages: 2, logic: L::Xor },
        ]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CircuitGraph;
    use crate::netlist::RegisterClass;

    #[test]
    fn every_archetype_generates_valid_labeled_netlists() {
        let lib = Arc::new(CellLibrary::standard());
        for a in builtin_archetypes() {
            for enc in [StateEncoding::OneHot, StateEncoding::Binary] {
                for v in VARIANTS {
                    let r = a.recipe(7, v, enc);
                    let (n, labels) = generate(&r, &lib).unwrap();
                    assert_eq!(labels.count(RegisterClass::State), enc.state_bits(a.states), "{}", r.netlist_name());
                    let g = CircuitGraph::build(&n);
                    let scc = g.scc();
                    for v in g.registers() {
                        if labels.get(&g.node(v).name) == Some(RegisterClass::State) {
                            assert!(scc.on_cycle[v]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn variants_share_the_machine() {
        let a = &builtin_archetypes()[0];
        assert_eq!(a.recipe(1, 1, StateEncoding::OneHot).fsm.transitions, a.recipe(1, 4, StateEncoding::Binary).fsm.transitions);
        assert_ne!(a.recipe(1, 1, StateEncoding::OneHot).fsm, a.recipe(2, 1, StateEncoding::OneHot).fsm);
    }

    #[test]
    fn bad_variant_rejected() {
        let r = builtin_archetypes()[0].recipe(1, 5, StateEncoding::OneHot);
        assert_eq!(generate(&r, &Arc::new(CellLibrary::standard())).unwrap_err(), RecipeError::Variant(5));
    }
}
