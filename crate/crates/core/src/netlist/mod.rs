// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlist representation.
//!
//! A [`Netlist`] is a flat set of single-output cell instances connected by
//! named nets. Every net has exactly one driver: a primary input or the
//! output pin of one instance. Netlists are validated on construction and
//! immutable afterwards.

mod json;
mod library;
mod normalize;
mod verilog;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use json::{emit_json_netlist, parse_json_netlist};
pub use library::{
    CellCategory, CellKind, CellLibrary, KindId, TruthTable, MAX_TRUTH_TABLE_ARITY,
};
pub use normalize::{normalize_to_aoi, AoiKinds};
pub use verilog::{emit_verilog, parse_verilog_subset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("cell library: {0}")]
    Library(String),
    #[error("library version mismatch: netlist wants {found:?}, library is {expected:?}")]
    LibraryVersion { expected: String, found: String },
    #[error("instance {instance}: unknown cell kind {kind:?}")]
    UnknownKind { instance: String, kind: String },
    #[error("instance {instance}: port kind {kind:?} cannot be instantiated")]
    PortInstance { instance: String, kind: String },
    #[error("instance {instance}: unknown net {net:?}")]
    UnknownNet { instance: String, net: String },
    #[error("instance {instance}: expected {expected} inputs, found {found}")]
    PinCount { instance: String, expected: usize, found: usize },
    #[error("net {net:?} is driven more than once")]
    MultiplyDriven { net: String },
    #[error("net {net:?} has no driver")]
    Undriven { net: String },
    #[error("duplicate net {0:?}")]
    DuplicateNet(String),
    #[error("duplicate instance {0:?}")]
    DuplicateInstance(String),
    #[error("net {net:?} is listed as both a primary input and a primary output")]
    PortConflict { net: String },
    #[error("labels: {0}")]
    Labels(String),
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: behavioral construct `{construct}` is not supported")]
    Behavioral { line: usize, column: usize, construct: String },
    #[error("combinational kind {0} has no truth table")]
    MissingTruthTable(String),
    #[error("library lacks a {0} cell required for normalization")]
    MissingTarget(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NetId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub kind: KindId,
    /// Input nets in the kind's pin order.
    pub inputs: Vec<NetId>,
    pub output: NetId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegisterClass {
    State,
    Data,
}

impl RegisterClass {
    pub fn is_state(self) -> bool {
        self == RegisterClass::State
    }
}

/// Ground-truth class of every register instance, keyed by instance id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterLabels(pub BTreeMap<String, RegisterClass>);

impl RegisterLabels {
    pub fn get(&self, id: &str) -> Option<RegisterClass> {
        self.0.get(id).copied()
    }

    pub fn count(&self, class: RegisterClass) -> usize {
        self.0.values().filter(|&&c| c == class).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Who drives a net.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Driver {
    /// Position in [`Netlist::primary_inputs`].
    Input(usize),
    /// Position in [`Netlist::instances`].
    Instance(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Netlist {
    name: String,
    library: Arc<CellLibrary>,
    nets: Vec<String>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    instances: Vec<Instance>,
    labels: Option<RegisterLabels>,
    drivers: Vec<Driver>,
}

impl Netlist {
    /// Validates and assembles a netlist.
    pub fn new(
        name: impl Into<String>,
        library: Arc<CellLibrary>,
        nets: Vec<String>,
        inputs: Vec<NetId>,
        outputs: Vec<NetId>,
        instances: Vec<Instance>,
        labels: Option<RegisterLabels>,
    ) -> Result<Self, NetlistError> {
        let mut seen = HashMap::with_capacity(nets.len());
        for (i, n) in nets.iter().enumerate() {
            if seen.insert(n.as_str(), i).is_some() {
                return Err(NetlistError::DuplicateNet(n.clone()));
            }
        }
        let check_net = |owner: &str, id: NetId| {
            if id.0 >= nets.len() {
                Err(NetlistError::UnknownNet { instance: owner.into(), net: format!("#{}", id.0) })
            } else {
                Ok(())
            }
        };

        let mut drivers: Vec<Option<Driver>> = vec![None; nets.len()];
        let mut drive = |net: NetId, d: Driver| {
            if drivers[net.0].replace(d).is_some() {
                Err(NetlistError::MultiplyDriven { net: nets[net.0].clone() })
            } else {
                Ok(())
            }
        };
        for (pos, &net) in inputs.iter().enumerate() {
            check_net("<ports>", net)?;
            drive(net, Driver::Input(pos))?;
        }

        let mut ids = HashMap::with_capacity(instances.len());
        for (pos, inst) in instances.iter().enumerate() {
            if ids.insert(inst.id.as_str(), pos).is_some() {
                return Err(NetlistError::DuplicateInstance(inst.id.clone()));
            }
            if inst.kind.0 >= library.len() {
                return Err(NetlistError::UnknownKind {
                    instance: inst.id.clone(),
                    kind: format!("#{}", inst.kind.0),
                });
            }
            let kind = library.kind(inst.kind);
            if kind.is_port() {
                return Err(NetlistError::PortInstance {
                    instance: inst.id.clone(),
                    kind: kind.name.clone(),
                });
            }
            if inst.inputs.len() != kind.input_count() {
                return Err(NetlistError::PinCount {
                    instance: inst.id.clone(),
                    expected: kind.input_count(),
                    found: inst.inputs.len(),
                });
            }
            for &net in &inst.inputs {
                check_net(&inst.id, net)?;
            }
            check_net(&inst.id, inst.output)?;
            drive(inst.output, Driver::Instance(pos))?;
        }

        let mut port_seen = vec![0u8; nets.len()];
        for &net in &inputs {
            port_seen[net.0] |= 1;
        }
        for &net in &outputs {
            check_net("<ports>", net)?;
            if port_seen[net.0] & 1 != 0 {
                return Err(NetlistError::PortConflict { net: nets[net.0].clone() });
            }
            if port_seen[net.0] & 2 != 0 {
                return Err(NetlistError::Schema(format!(
                    "net {:?} listed twice as a primary output",
                    nets[net.0]
                )));
            }
            port_seen[net.0] |= 2;
        }

        let drivers = drivers
            .into_iter()
            .enumerate()
            .map(|(i, d)| d.ok_or_else(|| NetlistError::Undriven { net: nets[i].clone() }))
            .collect::<Result<Vec<_>, _>>()?;

        if let Some(labels) = &labels {
            let registers: Vec<&str> = instances
                .iter()
                .filter(|i| library.kind(i.kind).is_register())
                .map(|i| i.id.as_str())
                .collect();
            if registers.len() != labels.len() {
                return Err(NetlistError::Labels(format!(
                    "{} labels for {} registers",
                    labels.len(),
                    registers.len()
                )));
            }
            for id in registers {
                if labels.get(id).is_none() {
                    return Err(NetlistError::Labels(format!("register {id} is unlabeled")));
                }
            }
        }

        Ok(Self {
            name: name.into(),
            library,
            nets,
            inputs,
            outputs,
            instances,
            labels,
            drivers,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn library(&self) -> &Arc<CellLibrary> {
        &self.library
    }

    pub fn nets(&self) -> &[String] {
        &self.nets
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.nets[id.0]
    }

    pub fn primary_inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn primary_outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn labels(&self) -> Option<&RegisterLabels> {
        self.labels.as_ref()
    }

    pub fn driver(&self, net: NetId) -> Driver {
        self.drivers[net.0]
    }

    pub fn kind_of(&self, inst: &Instance) -> &CellKind {
        self.library.kind(inst.kind)
    }

    pub fn registers(&self) -> impl Iterator<Item = (usize, &Instance)> {
        self.instances.iter().enumerate().filter(|(_, i)| self.kind_of(i).is_register())
    }

    pub fn register_count(&self) -> usize {
        self.registers().count()
    }

    /// Same circuit with the label block removed.
    pub fn without_labels(&self) -> Self {
        Self { labels: None, ..self.clone() }
    }

    /// Same circuit with `labels` attached, validated against the registers.
    pub fn with_labels(self, labels: RegisterLabels) -> Result<Self, NetlistError> {
        Self::new(
            self.name,
            self.library,
            self.nets,
            self.inputs,
            self.outputs,
            self.instances,
            Some(labels),
        )
    }

    /// Number of (net, sink pin) pairs, counting primary outputs as sinks.
    pub fn sink_count(&self) -> usize {
        self.instances.iter().map(|i| i.inputs.len()).sum::<usize>() + self.outputs.len()
    }
}
