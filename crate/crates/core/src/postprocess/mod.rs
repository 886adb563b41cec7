// SPDX-License-Identifier: Apache-2.0

//! Structural clean-up of register predictions.
//!
//! A state register must sit on a feedback path: its next value depends on
//! its current value. [`rectify`] demotes predicted state registers that lie
//! on no directed cycle of the circuit graph. [`expand_completeness`] goes
//! the other way and promotes every register sharing a cyclic strongly
//! connected component with a predicted state register, trading false
//! positives for fewer missed state registers.

use serde::{Deserialize, Serialize};

use crate::gnn::RegisterPrediction;
use crate::graph::{CircuitGraph, SccPartition};
use crate::netlist::RegisterClass;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipReason {
    /// Predicted state but on no directed cycle.
    NoCycle,
    /// Shares a cyclic component with a predicted state register.
    SharedScc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flip {
    pub register: String,
    pub node: usize,
    pub from: RegisterClass,
    pub to: RegisterClass,
    pub reason: FlipReason,
}

/// Predictions with every predicted-state register that is not on a cycle
/// turned into data, plus the list of changes.
pub fn rectify(
    g: &CircuitGraph,
    scc: &SccPartition,
    preds: &[RegisterPrediction],
) -> (Vec<RegisterPrediction>, Vec<Flip>) {
    let mut out = preds.to_vec();
    let mut flips = Vec::new();
    for p in &mut out {
        debug_assert!(g.node(p.node).is_register);
        if p.class == RegisterClass::State && !scc.on_cycle[p.node] {
            p.class = RegisterClass::Data;
            flips.push(Flip {
                register: p.name.clone(),
                node: p.node,
                from: RegisterClass::State,
                to: RegisterClass::Data,
                reason: FlipReason::NoCycle,
            });
        }
    }
    (out, flips)
}

/// Marks state every register whose component is cyclic and contains a
/// predicted state register.
pub fn expand_completeness(
    g: &CircuitGraph,
    scc: &SccPartition,
    preds: &[RegisterPrediction],
) -> (Vec<RegisterPrediction>, Vec<Flip>) {
    let mut hot = vec![false; scc.component_count()];
    for p in preds {
        debug_assert!(g.node(p.node).is_register);
        if p.class == RegisterClass::State && scc.on_cycle[p.node] {
            hot[scc.component[p.node]] = true;
        }
    }
    let mut out = preds.to_vec();
    let mut flips = Vec::new();
    for p in &mut out {
        if p.class == RegisterClass::Data && scc.on_cycle[p.node] && hot[scc.component[p.node]] {
            p.class = RegisterClass::State;
            flips.push(Flip {
                register: p.name.clone(),
                node: p.node,
                from: RegisterClass::Data,
                to: RegisterClass::State,
                reason: FlipReason::SharedScc,
            });
        }
    }
    (out, flips)
}
