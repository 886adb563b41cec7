// SPDX-License-Identifier: Apache-2.0

//! Rewriting a netlist into 2-input AND, 2-input OR and INV gates.
//!
//! Each combinational cell is replaced by a fixed sum-of-products built from
//! its truth table: one full minterm per true row (ascending row order), each
//! minterm a left-leaning AND chain over the inputs in pin order, the
//! minterms joined by a left-leaning OR chain. When the table has more true
//! rows than false rows the complement is built instead and inverted, so
//! NAND2 becomes INV(AND2). Inverted literals are shared within a cone.
//!
//! Cells that already are AND2, OR2 or INV pass through unchanged, which
//! makes the rewrite idempotent. Registers and 0-input constant cells are
//! kept as they are. A cone that reduces to a bare input is emitted as a
//! double inversion so the original output net keeps a gate driver.

use std::collections::HashMap;

use super::{CellCategory, CellLibrary, Instance, KindId, NetId, Netlist, NetlistError, TruthTable};

/// The three target kinds inside a library.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AoiKinds {
    pub and2: KindId,
    pub or2: KindId,
    pub inv: KindId,
}

impl AoiKinds {
    pub fn find(lib: &CellLibrary) -> Result<Self, NetlistError> {
        let and2 = TruthTable::from_fn(2, |x| x[0] && x[1]);
        let or2 = TruthTable::from_fn(2, |x| x[0] || x[1]);
        let inv = TruthTable::from_fn(1, |x| !x[0]);
        Ok(Self {
            and2: lib.find_function(and2).ok_or(NetlistError::MissingTarget("AND2"))?,
            or2: lib.find_function(or2).ok_or(NetlistError::MissingTarget("OR2"))?,
            inv: lib.find_function(inv).ok_or(NetlistError::MissingTarget("INV"))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Lit(usize),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

fn chain(mut items: Vec<Expr>, join: fn(Box<Expr>, Box<Expr>) -> Expr) -> Expr {
    let first = items.remove(0);
    items.into_iter().fold(first, |acc, e| join(Box::new(acc), Box::new(e)))
}

/// The fixed decomposition of a truth table with at least one input.
fn decompose(tt: TruthTable) -> Expr {
    let n = tt.arity();
    debug_assert!(n > 0);
    let invert = tt.ones() > tt.rows() - tt.ones();
    let target = if invert { tt.complement() } else { tt };
    if target.ones() == 0 {
        // constant tables: x0 & !x0, or x0 | !x0 when every row is true
        let lit = Box::new(Expr::Lit(0));
        let neg = Box::new(Expr::Not(Box::new(Expr::Lit(0))));
        return if invert { Expr::Or(lit, neg) } else { Expr::And(lit, neg) };
    }
    let terms = (0..target.rows())
        .filter(|&r| target.eval_row(r))
        .map(|row| {
            let lits = (0..n)
                .map(|i| {
                    if (row >> (n - 1 - i)) & 1 == 1 {
                        Expr::Lit(i)
                    } else {
                        Expr::Not(Box::new(Expr::Lit(i)))
                    }
                })
                .collect();
            chain(lits, Expr::And)
        })
        .collect();
    let sop = chain(terms, Expr::Or);
    let expr = if invert { Expr::Not(Box::new(sop)) } else { sop };
    match expr {
        Expr::Lit(i) => Expr::Not(Box::new(Expr::Not(Box::new(Expr::Lit(i))))),
        e => e,
    }
}

struct Emitter<'a> {
    kinds: AoiKinds,
    inputs: &'a [NetId],
    root_id: &'a str,
    root_out: NetId,
    nets: &'a mut Vec<String>,
    instances: &'a mut Vec<Instance>,
    inverted: HashMap<usize, NetId>,
    counter: usize,
}

impl Emitter<'_> {
    fn gate(&mut self, kind: KindId, inputs: Vec<NetId>, root: bool) -> NetId {
        let (id, output) = if root {
            (self.root_id.to_string(), self.root_out)
        } else {
            let k = self.counter;
            self.counter += 1;
            let net = NetId(self.nets.len());
            self.nets.push(format!("{}__n{k}", self.root_id));
            (format!("{}__g{k}", self.root_id), net)
        };
        self.instances.push(Instance { id, kind, inputs, output });
        output
    }

    fn emit(&mut self, e: &Expr, root: bool) -> NetId {
        match e {
            Expr::Lit(i) => self.inputs[*i],
            Expr::Not(inner) => {
                if let (Expr::Lit(i), false) = (inner.as_ref(), root) {
                    if let Some(&net) = self.inverted.get(i) {
                        return net;
                    }
                    let net = self.gate(self.kinds.inv, vec![self.inputs[*i]], false);
                    self.inverted.insert(*i, net);
                    return net;
                }
                let a = self.emit(inner, false);
                self.gate(self.kinds.inv, vec![a], root)
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                let a = self.emit(l, false);
                let b = self.emit(r, false);
                let kind = if matches!(e, Expr::And(..)) { self.kinds.and2 } else { self.kinds.or2 };
                self.gate(kind, vec![a, b], root)
            }
        }
    }
}

pub fn normalize_to_aoi(n: &Netlist, lib: &CellLibrary) -> Result<Netlist, NetlistError> {
    let kinds = AoiKinds::find(lib)?;
    let mut nets = n.nets().to_vec();
    let mut instances = Vec::with_capacity(n.instances().len() * 2);
    for inst in n.instances() {
        let kind = n.kind_of(inst);
        if kind.category != CellCategory::Combinational {
            instances.push(inst.clone());
            continue;
        }
        let tt = kind.truth_table.ok_or_else(|| NetlistError::MissingTruthTable(kind.name.clone()))?;
        let passthrough = match tt.arity() {
            0 => Some(inst.kind),
            1 if lib.find_function(tt) == Some(kinds.inv) => Some(kinds.inv),
            2 if lib.find_function(tt) == Some(kinds.and2) => Some(kinds.and2),
            2 if lib.find_function(tt) == Some(kinds.or2) => Some(kinds.or2),
            _ => None,
        };
        if let Some(k) = passthrough {
            instances.push(Instance { kind: k, ..inst.clone() });
            continue;
        }
        let expr = decompose(tt);
        let mut em = Emitter {
            kinds,
            inputs: &inst.inputs,
            root_id: &inst.id,
            root_out: inst.output,
            nets: &mut nets,
            instances: &mut instances,
            inverted: HashMap::new(),
            counter: 0,
        };
        em.emit(&expr, true);
    }
    Netlist::new(
        n.name(),
        n.library().clone(),
        nets,
        n.primary_inputs().to_vec(),
        n.primary_outputs().to_vec(),
        instances,
        n.labels().cloned(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn single_cell(lib: &Arc<CellLibrary>, kind: &str) -> Netlist {
        let k = lib.find(kind).unwrap();
        let arity = lib.kind(k).input_count();
        let mut nets: Vec<String> = (0..arity).map(|i| format!("x{i}")).collect();
        nets.push("y".into());
        Netlist::new(
            "cell",
            lib.clone(),
            nets,
            (0..arity).map(NetId).collect(),
            vec![NetId(arity)],
            vec![Instance {
                id: "u".into(),
                kind: k,
                inputs: (0..arity).map(NetId).collect(),
                output: NetId(arity),
            }],
            None,
        )
        .unwrap()
    }

    fn shape(n: &Netlist) -> Vec<(String, Vec<String>)> {
        n.instances()
            .iter()
            .map(|i| {
                (
                    n.kind_of(i).name.clone(),
                    i.inputs.iter().map(|&x| n.net_name(x).to_string()).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn nand2_becomes_inverted_and() {
        let lib = Arc::new(CellLibrary::extended());
        let out = normalize_to_aoi(&single_cell(&lib, "NAND2"), &lib).unwrap();
        assert_eq!(
            shape(&out),
            vec![
                ("AND2".to_string(), vec!["x0".to_string(), "x1".to_string()]),
                ("INV".to_string(), vec!["u__n0".to_string()]),
            ]
        );
        assert_eq!(out.instances()[1].id, "u");
        assert_eq!(out.net_name(out.instances()[1].output), "y");
    }

    #[test]
    fn xor2_becomes_two_minterms() {
        let lib = Arc::new(CellLibrary::standard());
        let out = normalize_to_aoi(&single_cell(&lib, "XOR2"), &lib).unwrap();
        // OR(AND(INV a, b), AND(a, INV b))
        let s = shape(&out);
        let names: Vec<&str> = s.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(names, ["INV", "AND2", "INV", "AND2", "OR2"]);
        assert_eq!(s[1].1, ["u__n0", "x1"]);
        assert_eq!(s[3].1, ["x0", "u__n2"]);
    }

    #[test]
    fn buffer_becomes_double_inversion() {
        let lib = Arc::new(CellLibrary::standard());
        let out = normalize_to_aoi(&single_cell(&lib, "BUF"), &lib).unwrap();
        let names: Vec<String> = shape(&out).into_iter().map(|(k, _)| k).collect();
        assert_eq!(names, ["INV", "INV"]);
    }

    #[test]
    fn missing_truth_table_is_reported() {
        let mut kinds = CellLibrary::standard().kinds().to_vec();
        kinds[9].truth_table = None;
        let lib = Arc::new(CellLibrary::new("opaque", kinds).unwrap());
        let err = normalize_to_aoi(&single_cell(&lib, "XOR2"), &lib).unwrap_err();
        assert_eq!(err, NetlistError::MissingTruthTable("XOR2".into()));
    }

    #[test]
    fn constant_cells_are_kept() {
        let lib = Arc::new(CellLibrary::extended());
        let out = normalize_to_aoi(&single_cell(&lib, "TIEHI"), &lib).unwrap();
        assert_eq!(shape(&out), vec![("TIEHI".to_string(), vec![])]);
    }
}
