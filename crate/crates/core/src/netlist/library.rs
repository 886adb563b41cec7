// SPDX-License-Identifier: Apache-2.0

//! Cell kinds, truth tables and the library manifest format.
//!
//! A truth table stores the output column of a cell in input-lexicographic
//! order: row `r` assigns input `i` the bit `(r >> (n - 1 - i)) & 1`, so the
//! first input is the most significant bit of the row index. The manifest
//! encodes the column as a hex number whose bit `r` is the output of row `r`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::NetlistError;

/// Largest arity a [`TruthTable`] can hold.
pub const MAX_TRUTH_TABLE_ARITY: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TruthTable {
    arity: u8,
    bits: u64,
}

impl TruthTable {
    pub fn new(arity: usize, bits: u64) -> Result<Self, NetlistError> {
        if arity > MAX_TRUTH_TABLE_ARITY {
            return Err(NetlistError::Library(format!(
                "truth table arity {arity} exceeds {MAX_TRUTH_TABLE_ARITY}"
            )));
        }
        let rows = 1usize << arity;
        let mask = if rows == 64 { u64::MAX } else { (1u64 << rows) - 1 };
        if bits & !mask != 0 {
            return Err(NetlistError::Library(format!(
                "truth table {bits:#x} has bits beyond {rows} rows"
            )));
        }
        Ok(Self { arity: arity as u8, bits })
    }

    /// Tabulates `f` over every input assignment.
    pub fn from_fn(arity: usize, f: impl Fn(&[bool]) -> bool) -> Self {
        assert!(arity <= MAX_TRUTH_TABLE_ARITY);
        let mut bits = 0u64;
        let mut assignment = vec![false; arity];
        for row in 0..(1usize << arity) {
            for (i, a) in assignment.iter_mut().enumerate() {
                *a = (row >> (arity - 1 - i)) & 1 == 1;
            }
            if f(&assignment) {
                bits |= 1 << row;
            }
        }
        Self { arity: arity as u8, bits }
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn rows(&self) -> usize {
        1 << self.arity
    }

    pub fn eval_row(&self, row: usize) -> bool {
        (self.bits >> row) & 1 == 1
    }

    pub fn eval(&self, inputs: &[bool]) -> bool {
        debug_assert_eq!(inputs.len(), self.arity());
        let row = inputs.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        self.eval_row(row)
    }

    pub fn ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn complement(&self) -> Self {
        let rows = self.rows();
        let mask = if rows == 64 { u64::MAX } else { (1u64 << rows) - 1 };
        Self { arity: self.arity, bits: !self.bits & mask }
    }

    pub fn to_hex(&self) -> String {
        let digits = (self.rows() / 4).max(1);
        format!("{:0digits$x}", self.bits)
    }

    pub fn from_hex(arity: usize, hex: &str) -> Result<Self, NetlistError> {
        let bits = u64::from_str_radix(hex.trim(), 16)
            .map_err(|e| NetlistError::Library(format!("bad truth table hex {hex:?}: {e}")))?;
        Self::new(arity, bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellCategory {
    Combinational,
    Register,
    InputPort,
    OutputPort,
}

/// Index of a kind inside its [`CellLibrary`]; fixes the one-hot position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KindId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellKind {
    pub name: String,
    pub category: CellCategory,
    /// Data input pin names, in port order.
    pub inputs: Vec<String>,
    pub output: String,
    pub truth_table: Option<TruthTable>,
    /// Register clock pin; accepted by the Verilog reader and not modeled.
    pub clock: Option<String>,
}

impl CellKind {
    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_register(&self) -> bool {
        self.category == CellCategory::Register
    }

    pub fn is_port(&self) -> bool {
        matches!(self.category, CellCategory::InputPort | CellCategory::OutputPort)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestKind {
    name: String,
    category: CellCategory,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth_table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clock: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: String,
    kinds: Vec<ManifestKind>,
}

/// An ordered set of cell kinds. Kind order is significant: it fixes the
/// one-hot feature positions, so it is part of the library fingerprint.
#[derive(Clone, Debug)]
pub struct CellLibrary {
    version: String,
    kinds: Vec<CellKind>,
    by_name: HashMap<String, KindId>,
}

impl PartialEq for CellLibrary {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.kinds == other.kinds
    }
}

impl Eq for CellLibrary {}

impl CellLibrary {
    pub fn new(version: impl Into<String>, kinds: Vec<CellKind>) -> Result<Self, NetlistError> {
        let mut by_name = HashMap::with_capacity(kinds.len());
        let (mut inputs, mut outputs) = (0, 0);
        for (i, kind) in kinds.iter().enumerate() {
            if by_name.insert(kind.name.clone(), KindId(i)).is_some() {
                return Err(NetlistError::Library(format!("duplicate kind name {}", kind.name)));
            }
            if let Some(tt) = &kind.truth_table {
                if tt.arity() != kind.input_count() {
                    return Err(NetlistError::Library(format!(
                        "kind {}: truth table arity {} != input count {}",
                        kind.name,
                        tt.arity(),
                        kind.input_count()
                    )));
                }
            }
            match kind.category {
                CellCategory::Register => {
                    if kind.input_count() != 1 || kind.truth_table.is_some() {
                        return Err(NetlistError::Library(format!(
                            "register kind {} must have exactly one data input and no truth table",
                            kind.name
                        )));
                    }
                }
                CellCategory::InputPort => inputs += 1,
                CellCategory::OutputPort => outputs += 1,
                CellCategory::Combinational => {}
            }
        }
        if inputs != 1 || outputs != 1 {
            return Err(NetlistError::Library(
                "library needs exactly one input_port and one output_port kind".into(),
            ));
        }
        Ok(Self { version: version.into(), kinds, by_name })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn kinds(&self) -> &[CellKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, id: KindId) -> &CellKind {
        &self.kinds[id.0]
    }

    pub fn find(&self, name: &str) -> Option<KindId> {
        self.by_name.get(name).copied()
    }

    fn find_category(&self, category: CellCategory) -> KindId {
        let pos = self.kinds.iter().position(|k| k.category == category);
        KindId(pos.expect("validated at construction"))
    }

    pub fn input_port(&self) -> KindId {
        self.find_category(CellCategory::InputPort)
    }

    pub fn output_port(&self) -> KindId {
        self.find_category(CellCategory::OutputPort)
    }

    /// First combinational kind whose truth table equals `tt`.
    pub fn find_function(&self, tt: TruthTable) -> Option<KindId> {
        self.kinds
            .iter()
            .position(|k| k.category == CellCategory::Combinational && k.truth_table == Some(tt))
            .map(KindId)
    }

    pub fn from_manifest_json(bytes: &[u8]) -> Result<Self, NetlistError> {
        let manifest: Manifest = serde_json::from_slice(bytes)
            .map_err(|e| NetlistError::Library(format!("manifest: {e}")))?;
        let kinds = manifest
            .kinds
            .into_iter()
            .map(|k| {
                let truth_table = k
                    .truth_table
                    .as_deref()
                    .map(|hex| TruthTable::from_hex(k.inputs.len(), hex))
                    .transpose()?;
                Ok(CellKind {
                    name: k.name,
                    category: k.category,
                    inputs: k.inputs,
                    output: k.output,
                    truth_table,
                    clock: k.clock,
                })
            })
            .collect::<Result<Vec<_>, NetlistError>>()?;
        Self::new(manifest.version, kinds)
    }

    pub fn to_manifest_json(&self) -> String {
        let manifest = Manifest {
            version: self.version.clone(),
            kinds: self
                .kinds
                .iter()
                .map(|k| ManifestKind {
                    name: k.name.clone(),
                    category: k.category,
                    inputs: k.inputs.clone(),
                    output: k.output.clone(),
                    truth_table: k.truth_table.map(|t| t.to_hex()),
                    clock: k.clock.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&manifest).expect("manifest serializes")
    }

    /// SHA-256 over the canonical manifest, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_manifest_json().as_bytes()))
    }

    /// The 11-kind library the benchmark generator targets.
    pub fn standard() -> Self {
        let kinds = vec![
            port("INPUT", CellCategory::InputPort, &[]),
            port("OUTPUT", CellCategory::OutputPort, &["A"]),
            dff(),
            comb("INV", &["A"], |x| !x[0]),
            comb("BUF", &["A"], |x| x[0]),
            comb("AND2", &["A", "B"], |x| x[0] && x[1]),
            comb("AND3", &["A", "B", "C"], |x| x[0] && x[1] && x[2]),
            comb("OR2", &["A", "B"], |x| x[0] || x[1]),
            comb("OR3", &["A", "B", "C"], |x| x[0] || x[1] || x[2]),
            comb("XOR2", &["A", "B"], |x| x[0] ^ x[1]),
            comb("MUX2", &["A", "B", "S"], |x| if x[2] { x[1] } else { x[0] }),
        ];
        Self::new("std11-1", kinds).expect("standard library is valid")
    }

    /// A larger library with inverting, complex and constant cells.
    pub fn extended() -> Self {
        let mut kinds = Self::standard().kinds;
        kinds.extend([
            comb("NAND2", &["A", "B"], |x| !(x[0] && x[1])),
            comb("NOR2", &["A", "B"], |x| !(x[0] || x[1])),
            comb("XNOR2", &["A", "B"], |x| x[0] == x[1]),
            comb("NAND3", &["A", "B", "C"], |x| !(x[0] && x[1] && x[2])),
            comb("NOR3", &["A", "B", "C"], |x| !(x[0] || x[1] || x[2])),
            comb("AOI21", &["A", "B", "C"], |x| !((x[0] && x[1]) || x[2])),
            comb("OAI21", &["A", "B", "C"], |x| !((x[0] || x[1]) && x[2])),
            comb("AOI22", &["A", "B", "C", "D"], |x| !((x[0] && x[1]) || (x[2] && x[3]))),
            comb("MAJ3", &["A", "B", "C"], |x| (x[0] as u8 + x[1] as u8 + x[2] as u8) >= 2),
            comb("XOR3", &["A", "B", "C"], |x| x[0] ^ x[1] ^ x[2]),
            comb("MUX4", &["A", "B", "C", "D", "S0", "S1"], |x| {
                x[(x[5] as usize) * 2 + x[4] as usize]
            }),
            comb("TIEHI", &[], |_| true),
            comb("TIELO", &[], |_| false),
        ]);
        Self::new("ext24-1", kinds).expect("extended library is valid")
    }
}

impl fmt::Display for CellLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} kinds)", self.version, self.kinds.len())
    }
}

fn port(name: &str, category: CellCategory, inputs: &[&str]) -> CellKind {
    CellKind {
        name: name.into(),
        category,
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        output: if category == CellCategory::InputPort { "Y".into() } else { String::new() },
        truth_table: None,
        clock: None,
    }
}

fn dff() -> CellKind {
    CellKind {
        name: "DFF".into(),
        category: CellCategory::Register,
        inputs: vec!["D".into()],
        output: "Q".into(),
        truth_table: None,
        clock: Some("CK".into()),
    }
}

fn comb(name: &str, inputs: &[&str], f: impl Fn(&[bool]) -> bool) -> CellKind {
    CellKind {
        name: name.into(),
        category: CellCategory::Combinational,
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        output: "Y".into(),
        truth_table: Some(TruthTable::from_fn(inputs.len(), f)),
        clock: None,
    }
}
